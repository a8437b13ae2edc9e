#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dart/arena.hpp"
#include "dart/nn/net.hpp"
#include "dart/obs.hpp"
#include "dart/policy.hpp"
#include "dart/reward.hpp"

namespace dart {

struct RlConfig {
  std::int64_t total_steps = 200000;     // desk scale; paper runs 2M
  int n_step = 20;
  double gamma = 0.95;
  double entropy_w_tracker = 0.01;
  double entropy_w_adversary = 0.03;
  double lr = 1e-3;
  int workers = 1;
  bool reward_norm = true;
  std::int64_t snapshot_interval = 10000;  // paper saves every 50K
  double clip_norm = 10.0;
  bool sync_workers = false;  // workers > 1: average gradients per round
};

// R_t = r_t + gamma * R_{t+1}, seeded with the bootstrap value.
std::vector<double> n_step_returns(const std::vector<double>& rewards,
                                   double bootstrap, double gamma);

// Scale estimator for reward normalization: running root-mean-square kept by
// Welford-style accumulation of the second raw moment, so a constant stream
// normalizes toward +-1 instead of blowing up on a zero variance.
class RewardNormalizer {
 public:
  double normalize(double r) {
    n_ += 1;
    mean_sq_ += (r * r - mean_sq_) / static_cast<double>(n_);
    return r / (scale() + 1e-8);
  }
  double scale() const { return std::sqrt(mean_sq_); }
  long count() const { return n_; }

 private:
  long n_ = 0;
  double mean_sq_ = 0.0;
};

// One network instance's slice of a rollout window.
struct RoleRollout {
  std::vector<std::vector<nn::Vec>> entities;
  std::vector<nn::Vec> extras;
  std::vector<int> actions;
  std::vector<double> rewards;
  nn::MemoryState mem_start;
  double bootstrap = 0.0;

  std::size_t size() const { return actions.size(); }
  void clear() {
    entities.clear();
    extras.clear();
    actions.clear();
    rewards.clear();
  }
};

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// A3C loss over one window, gradients accumulated into `grads`:
//   sum_t [ -log pi(a_t) * A_t + 0.5 (R_t - V_t)^2 - entropy_w * H(pi_t) ]
// Advantages are treated as constants. Throws DivergenceError on a
// non-finite loss.
LossBreakdown actor_critic_update(const nn::PolicyNet& net,
                                  nn::GradBuffer& grads,
                                  const RoleRollout& rollout,
                                  const RlConfig& cfg, double entropy_w);

struct EpisodeLogRow {
  std::int64_t step = 0;
  std::string role;
  double episode_reward = 0.0;
  int episode_length = 0;
  double entropy = 0.0;
  LossBreakdown loss;
};

struct TrainingLog {
  std::vector<EpisodeLogRow> rows;
  std::map<std::string, std::vector<double>> episode_rewards;  // raw, per role

  void record(const EpisodeLogRow& row) {
    rows.push_back(row);
    episode_rewards[row.role].push_back(row.episode_reward);
  }
};

// Environment + architecture bundle shared by the training entry points.
struct TrainContext {
  ArenaConfig arena;
  RewardParams reward;
  ObsParams obs;
  NavigatorConfig nav;
  DetectionConfig detection;
  nn::NetSpec tracker_spec;    // grounded tracker, no extra input
  nn::NetSpec adversary_spec;  // target/distractor, tracker action appended
  nn::NetSpec student_spec;    // detection tracker, own action appended
};

TrainContext default_train_context();

struct SelfplayResult {
  nn::PolicyNet tracker;
  nn::PolicyNet target;
  nn::PolicyNet distractor;
  ModelPool pool;
  TrainingLog log;
};

// Self-play over all three roles; target/distractor snapshots land in the
// pool every cfg.snapshot_interval interactions.
SelfplayResult selfplay_train(const TrainContext& ctx, const RlConfig& cfg,
                              std::uint64_t seed);

// Tracker-only updates against frozen opponents sampled from the pool at
// each episode start.
TrainingLog finetune_tracker(nn::PolicyNet& tracker, const ModelPool& pool,
                             const TrainContext& ctx, const RlConfig& cfg,
                             std::uint64_t seed);

// Detection-observation tracker trained directly by actor-critic (the
// teacher-student ablation arm). Opponents come from the pool when given,
// otherwise scripted navigators drive them.
TrainingLog rl_from_detections(nn::PolicyNet& student, const ModelPool* pool,
                               const TrainContext& ctx, const RlConfig& cfg,
                               std::uint64_t seed);

struct AdversarialRunResult {
  std::vector<double> tracker_episode_rewards;  // in episode order
  std::vector<std::int64_t> episode_end_interactions;
  TrainingLog log;
};

// Target + distractors learn against a frozen tracker; adversary parameters
// start from the supplied nets (the meta policies). Only the adversaries
// update. The tracker's per-episode reward traces robustness degradation.
AdversarialRunResult adversarial_train(TrackerController& tracker,
                                       nn::PolicyNet target,
                                       nn::PolicyNet distractor,
                                       int n_distractors,
                                       const TrainContext& ctx,
                                       const RlConfig& cfg, std::uint64_t seed);

}  // namespace dart
