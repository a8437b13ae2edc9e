#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dart/arena.hpp"
#include "dart/nn/net.hpp"
#include "dart/obs.hpp"
#include "dart/reward.hpp"
#include "dart/rng.hpp"

namespace dart {

// --- Scripted navigator -----------------------------------------------------

struct NavigatorConfig {
  double waypoint_radius = 0.5;   // m, arrival threshold
  int resample_steps = 100;       // forced waypoint refresh
  double speed_min = 0.5;         // m/s, sampled set speed range
  double speed_max = 2.0;
  double bearing_turn = 0.3;      // rad, pure-turn threshold
  double bearing_fwd_turn = 0.1;  // rad, forward-turn threshold
};

struct NavigatorState {
  double waypoint_x = 0.0;
  double waypoint_y = 0.0;
  double set_speed = 1.0;
  int steps_since_resample = 0;
  bool initialized = false;
};

Action navigator_act(NavigatorState& state, const Pose& self_pose,
                     const WorldState& world, const NavigatorConfig& cfg,
                     Rng& rng);

// --- Geometric controller ---------------------------------------------------

struct PidParams {
  double p_lin = 1.0;           // 1/m
  double p_ang = 2.0;           // 1/rad
  double deadband_rho = 0.3;    // m
  double deadband_theta = 0.1;  // rad
};

// Discretized proportional law on (rho, theta) errors toward the expected
// target point. A bearing error beyond its deadband dominates the choice.
Action pid_act(const PolarRel& rel_target, const PidParams& pid,
               const RewardParams& reward);

// Stateful detection-association wrapper: tracks the estimate nearest the
// previous one (appearance-filtered), starting from the detection nearest
// the expected point.
class PidTracker {
 public:
  PidTracker(const PidParams& pid, const RewardParams& reward)
      : pid_(pid), reward_(reward) {}

  void begin_episode();
  Action act(const DetectionObservation& obs);
  bool lost() const { return lost_; }

 private:
  PidParams pid_;
  RewardParams reward_;
  bool has_estimate_ = false;
  bool lost_ = true;
  double est_rho_ = 0.0;
  double est_theta_ = 0.0;
  int est_appearance_ = -1;
};

// --- Neural acting ----------------------------------------------------------

enum class ActMode { Sample, Greedy };

struct ActResult {
  Action action;
  nn::ForwardResult net;
};

Action sample_action(const std::array<double, kNumActions>& probs, Rng& rng);
Action greedy_action(const std::array<double, kNumActions>& probs);

ActResult neural_act(const nn::PolicyNet& net, const std::vector<nn::Vec>& entities,
                     const nn::Vec& extra, const nn::MemoryState& memory,
                     ActMode mode, Rng& rng);

// Observation encoders shared by every neural consumer.
std::vector<nn::Vec> grounded_entities(const GroundedObservation& obs);
nn::Vec extra_from(const std::vector<double>& onehot);
std::vector<nn::Vec> detection_entities(const DetectionObservation& obs,
                                        double rho_max, int appearance_pool);

// --- Tracker controllers ----------------------------------------------------

// Per-episode stateful tracker controller; both observation flavors are
// supplied every step so one interface serves benchmarks and the
// adversarial-testing loop.
class TrackerController {
 public:
  virtual ~TrackerController() = default;
  virtual void begin_episode(std::uint64_t episode_seed) = 0;
  virtual Action act(const WorldState& world,
                     const GroundedObservation& grounded,
                     const DetectionObservation& detections, Rng& rng) = 0;
};

class RandomController final : public TrackerController {
 public:
  void begin_episode(std::uint64_t) override {}
  Action act(const WorldState&, const GroundedObservation&,
             const DetectionObservation&, Rng& rng) override {
    return static_cast<Action>(rng.uniform_int(kNumActions));
  }
};

class PidController final : public TrackerController {
 public:
  PidController(const PidParams& pid, const RewardParams& reward)
      : impl_(pid, reward) {}
  void begin_episode(std::uint64_t) override { impl_.begin_episode(); }
  Action act(const WorldState&, const GroundedObservation&,
             const DetectionObservation& detections, Rng&) override {
    return impl_.act(detections);
  }

 private:
  PidTracker impl_;
};

// Grounded-state neural tracker (the meta/teacher policy).
class TeacherController final : public TrackerController {
 public:
  TeacherController(const nn::PolicyNet& net, ActMode mode)
      : net_(&net), mode_(mode) {}
  void begin_episode(std::uint64_t) override { mem_ = net_->initial_memory(); }
  Action act(const WorldState&, const GroundedObservation& grounded,
             const DetectionObservation&, Rng& rng) override {
    const ActResult r = neural_act(*net_, grounded_entities(grounded),
                                   nn::Vec(), mem_, mode_, rng);
    mem_ = r.net.memory;
    return r.action;
  }

 private:
  const nn::PolicyNet* net_;
  ActMode mode_;
  nn::MemoryState mem_;
};

// Detection-observation neural tracker (the student policy).
class StudentController final : public TrackerController {
 public:
  StudentController(const nn::PolicyNet& net, ActMode mode, double rho_max,
                    int appearance_pool)
      : net_(&net), mode_(mode), rho_max_(rho_max), pool_(appearance_pool) {}
  void begin_episode(std::uint64_t) override { mem_ = net_->initial_memory(); }
  Action act(const WorldState&, const GroundedObservation&,
             const DetectionObservation& detections, Rng& rng) override {
    const ActResult r = neural_act(
        *net_, detection_entities(detections, rho_max_, pool_),
        extra_from(detections.last_self_action), mem_, mode_, rng);
    mem_ = r.net.memory;
    return r.action;
  }

 private:
  const nn::PolicyNet* net_;
  ActMode mode_;
  double rho_max_;
  int pool_;
  nn::MemoryState mem_;
};

// --- Model pool -------------------------------------------------------------

struct PoolSnapshot {
  std::int64_t interaction_count = 0;
  nn::PolicyNet target;
  nn::PolicyNet distractor;
};

// Versioned target/distractor snapshots indexed by interaction count,
// replayed during distillation as the curriculum.
class ModelPool {
 public:
  void save(std::int64_t interaction_count, nn::PolicyNet target,
            nn::PolicyNet distractor);
  const PoolSnapshot& sample(Rng& rng) const;

  std::size_t size() const { return snapshots_.size(); }
  bool empty() const { return snapshots_.empty(); }
  const PoolSnapshot& at(std::size_t i) const { return snapshots_[i]; }
  const PoolSnapshot& back() const { return snapshots_.back(); }

  void persist(const std::filesystem::path& dir) const;
  static ModelPool load(const std::filesystem::path& dir);

 private:
  std::vector<PoolSnapshot> snapshots_;
};

// Snapshots scheduled by "every interval interactions": floor(total/interval).
inline std::int64_t planned_snapshots(std::int64_t total_interactions,
                                      std::int64_t interval) {
  return total_interactions / interval;
}

}  // namespace dart
