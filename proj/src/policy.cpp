#include "dart/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "dart/errors.hpp"

namespace dart {

using nlohmann::json;

Action navigator_act(NavigatorState& state, const Pose& self_pose,
                     const WorldState& world, const NavigatorConfig& cfg,
                     Rng& rng) {
  const double dist = std::hypot(state.waypoint_x - self_pose.x,
                                 state.waypoint_y - self_pose.y);
  if (!state.initialized || dist <= cfg.waypoint_radius ||
      state.steps_since_resample >= cfg.resample_steps) {
    state.waypoint_x = rng.uniform(-world.bounds_half_w, world.bounds_half_w);
    state.waypoint_y = rng.uniform(-world.bounds_half_h, world.bounds_half_h);
    state.set_speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    state.steps_since_resample = 0;
    state.initialized = true;
  }
  state.steps_since_resample += 1;

  const double bearing = wrap_angle(
      std::atan2(state.waypoint_y - self_pose.y, state.waypoint_x - self_pose.x) -
      self_pose.heading);
  if (std::abs(bearing) > cfg.bearing_turn) {
    return bearing > 0.0 ? Action::TurnLeft : Action::TurnRight;
  }
  if (std::abs(bearing) > cfg.bearing_fwd_turn) {
    return bearing > 0.0 ? Action::ForwardLeft : Action::ForwardRight;
  }
  return Action::Forward;
}

Action pid_act(const PolarRel& rel_target, const PidParams& pid,
               const RewardParams& reward) {
  const double rho_err = rel_target.rho - reward.rho_star;
  const double theta_err = wrap_angle(rel_target.theta - reward.theta_star);
  // Continuous law: v_lin = p_lin * rho_err (positive -> forward),
  // v_ang = -p_ang * theta_err; the deadbanded discretization keys on the
  // error signs, so the gains only matter to callers using the raw commands.
  if (std::abs(theta_err) > pid.deadband_theta) {
    // theta_err > 0 puts the target left of the expected bearing: turn left.
    if (rho_err > pid.deadband_rho) {
      return theta_err > 0.0 ? Action::ForwardLeft : Action::ForwardRight;
    }
    return theta_err > 0.0 ? Action::TurnLeft : Action::TurnRight;
  }
  if (rho_err > pid.deadband_rho) return Action::Forward;
  if (rho_err < -pid.deadband_rho) return Action::Backward;
  return Action::NoOp;
}

void PidTracker::begin_episode() {
  has_estimate_ = false;
  lost_ = true;
  est_appearance_ = -1;
}

Action PidTracker::act(const DetectionObservation& obs) {
  if (obs.detections.empty()) {
    lost_ = true;
    return Action::NoOp;
  }
  auto closeness = [](double rho_a, double theta_a, double rho_b,
                      double theta_b) {
    return std::hypot(rho_a - rho_b, wrap_angle(theta_a - theta_b));
  };

  const Detection* best = nullptr;
  double best_d = 0.0;
  if (!has_estimate_) {
    for (const Detection& d : obs.detections) {
      const double dist =
          closeness(d.rho, d.theta, reward_.rho_star, reward_.theta_star);
      if (best == nullptr || dist < best_d) {
        best = &d;
        best_d = dist;
      }
    }
  } else {
    // Prefer detections wearing the tracked appearance; fall back to any.
    for (int pass = 0; pass < 2 && best == nullptr; ++pass) {
      for (const Detection& d : obs.detections) {
        if (pass == 0 && d.appearance_id != est_appearance_) continue;
        const double dist = closeness(d.rho, d.theta, est_rho_, est_theta_);
        if (best == nullptr || dist < best_d) {
          best = &d;
          best_d = dist;
        }
      }
    }
  }
  est_rho_ = best->rho;
  est_theta_ = best->theta;
  est_appearance_ = best->appearance_id;
  has_estimate_ = true;
  lost_ = false;
  return pid_act(PolarRel{est_rho_, est_theta_, 0.0}, pid_, reward_);
}

Action sample_action(const std::array<double, kNumActions>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<Action>(a);
  }
  return static_cast<Action>(kNumActions - 1);
}

Action greedy_action(const std::array<double, kNumActions>& probs) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (probs[a] > probs[best]) best = a;  // ties keep the lowest code
  }
  return static_cast<Action>(best);
}

ActResult neural_act(const nn::PolicyNet& net,
                     const std::vector<nn::Vec>& entities, const nn::Vec& extra,
                     const nn::MemoryState& memory, ActMode mode, Rng& rng) {
  ActResult r{Action::NoOp, nn::forward(net, entities, extra, memory)};
  r.action = mode == ActMode::Sample ? sample_action(r.net.probs, rng)
                                     : greedy_action(r.net.probs);
  return r;
}

std::vector<nn::Vec> grounded_entities(const GroundedObservation& obs) {
  std::vector<nn::Vec> out;
  out.reserve(obs.features.size());
  for (const EntityFeature& f : obs.features) {
    nn::Vec v(5);
    v << f.rho_norm, f.cos_theta, f.sin_theta, f.cos_phi, f.sin_phi;
    out.push_back(std::move(v));
  }
  return out;
}

nn::Vec extra_from(const std::vector<double>& onehot) {
  nn::Vec v(static_cast<Eigen::Index>(onehot.size()));
  for (std::size_t i = 0; i < onehot.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = onehot[i];
  }
  return v;
}

std::vector<nn::Vec> detection_entities(const DetectionObservation& obs,
                                        double rho_max, int appearance_pool) {
  std::vector<nn::Vec> out;
  out.reserve(obs.detections.size());
  for (const Detection& d : obs.detections) {
    nn::Vec v = nn::Vec::Zero(3 + appearance_pool);
    v[0] = d.rho / rho_max;
    v[1] = std::cos(d.theta);
    v[2] = std::sin(d.theta);
    v[3 + d.appearance_id] = 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

void ModelPool::save(std::int64_t interaction_count, nn::PolicyNet target,
                     nn::PolicyNet distractor) {
  if (!snapshots_.empty() &&
      interaction_count <= snapshots_.back().interaction_count) {
    throw std::invalid_argument("pool snapshots must be strictly increasing");
  }
  snapshots_.push_back(
      PoolSnapshot{interaction_count, std::move(target), std::move(distractor)});
}

const PoolSnapshot& ModelPool::sample(Rng& rng) const {
  if (snapshots_.empty()) throw MissingArtifactError("empty model pool");
  return snapshots_[rng.uniform_int(static_cast<int>(snapshots_.size()))];
}

void ModelPool::persist(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json index;
  index["snapshots"] = json::array();
  char name[64];
  for (const PoolSnapshot& s : snapshots_) {
    std::snprintf(name, sizeof(name), "target_%010lld.ckpt",
                  static_cast<long long>(s.interaction_count));
    const std::string target_file = name;
    std::snprintf(name, sizeof(name), "distractor_%010lld.ckpt",
                  static_cast<long long>(s.interaction_count));
    const std::string distractor_file = name;
    nn::save_checkpoint(dir / target_file, s.target);
    nn::save_checkpoint(dir / distractor_file, s.distractor);
    index["snapshots"].push_back({{"interactions", s.interaction_count},
                                  {"target", target_file},
                                  {"distractor", distractor_file}});
  }
  std::ofstream os(dir / "pool_index.json");
  os << index.dump(2) << "\n";
}

ModelPool ModelPool::load(const std::filesystem::path& dir) {
  const auto index_path = dir / "pool_index.json";
  std::ifstream is(index_path);
  if (!is) throw MissingArtifactError("missing pool index " + index_path.string());
  json index;
  try {
    is >> index;
  } catch (const json::parse_error&) {
    throw MissingArtifactError("corrupt pool index " + index_path.string());
  }
  ModelPool pool;
  for (const auto& entry : index.at("snapshots")) {
    PoolSnapshot s{entry.at("interactions").get<std::int64_t>(),
                   nn::load_checkpoint(dir / entry.at("target").get<std::string>()),
                   nn::load_checkpoint(
                       dir / entry.at("distractor").get<std::string>())};
    pool.snapshots_.push_back(std::move(s));
  }
  return pool;
}

}  // namespace dart
