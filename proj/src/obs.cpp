#include "dart/obs.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dart/errors.hpp"

namespace dart {

std::vector<double> onehot_action(Action a) {
  std::vector<double> v(kNumActions, 0.0);
  v[static_cast<int>(a)] = 1.0;
  return v;
}

namespace {

// Sorts agent indices by rho ascending relative to the observer, breaking
// ties by index so the order is a deterministic total order.
std::vector<int> by_rho(const WorldState& world, const Pose& observer,
                        const std::vector<int>& indices) {
  std::vector<std::pair<double, int>> keyed;
  keyed.reserve(indices.size());
  for (int i : indices) {
    keyed.emplace_back(relative_pose(observer, world.agents[i].pose).rho, i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  out.reserve(keyed.size());
  for (const auto& [rho, i] : keyed) out.push_back(i);
  return out;
}

}  // namespace

GroundedObservation grounded_obs(const WorldState& world, int agent_index,
                                 const ObsParams& p,
                                 Action tracker_last_action) {
  const int n = static_cast<int>(world.agents.size());
  if (agent_index < 0 || agent_index >= n) {
    throw std::invalid_argument("agent index " + std::to_string(agent_index) +
                                " out of range");
  }
  const Pose& self = world.agents[agent_index].pose;

  std::vector<int> order;
  std::vector<int> rest;
  if (agent_index == 0) {
    order.push_back(1);
    for (int i = 2; i < n; ++i) rest.push_back(i);
  } else if (agent_index == 1) {
    order.push_back(0);
    for (int i = 2; i < n; ++i) rest.push_back(i);
  } else {
    order.push_back(0);
    order.push_back(1);
    for (int i = 2; i < n; ++i) {
      if (i != agent_index) rest.push_back(i);
    }
  }
  for (int i : by_rho(world, self, rest)) order.push_back(i);

  GroundedObservation obs;
  obs.features.reserve(order.size());
  for (int i : order) {
    obs.features.push_back(
        encode_entity(relative_pose(self, world.agents[i].pose), p.rho_max));
  }
  if (agent_index != 0) {
    obs.tracker_last_action = onehot_action(tracker_last_action);
  }
  return obs;
}

AppearanceMap draw_appearances(const WorldState& world,
                               const DetectionConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(world.agents.size());
  AppearanceMap ids(n, 0);
  if (cfg.unique_appearances) {
    if (n - 1 > cfg.appearance_pool) {
      throw ConfigError("unique appearances need pool >= entity count (" +
                        std::to_string(n - 1) + " entities, pool " +
                        std::to_string(cfg.appearance_pool) + ")");
    }
    std::vector<int> pool(cfg.appearance_pool);
    for (int i = 0; i < cfg.appearance_pool; ++i) pool[i] = i;
    for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i) {
      std::swap(pool[i], pool[rng.uniform_int(i + 1)]);
    }
    for (int i = 1; i < n; ++i) ids[i] = pool[i - 1];
  } else {
    for (int i = 1; i < n; ++i) ids[i] = rng.uniform_int(cfg.appearance_pool);
  }
  return ids;
}

DetectionObservation detection_obs(const WorldState& world,
                                   const ArenaConfig& arena,
                                   const DetectionConfig& cfg,
                                   const AppearanceMap& appearances,
                                   Action last_self_action, Rng& rng) {
  const AgentState& tracker = world.agents[0];
  DetectionObservation obs;
  for (int i = 1; i < static_cast<int>(world.agents.size()); ++i) {
    // The noise stream advances for every entity regardless of visibility so
    // the draw sequence does not depend on FOV outcomes.
    const double n_rho = rng.normal(0.0, cfg.noise_std_rho);
    const double n_theta = rng.normal(0.0, cfg.noise_std_theta);
    if (!in_fov(tracker, world.agents[i], arena)) continue;
    const PolarRel rel = relative_pose(tracker.pose, world.agents[i].pose);
    Detection d;
    d.rho = std::max(0.0, rel.rho + n_rho);
    d.theta = wrap_angle(rel.theta + n_theta);
    d.appearance_id = appearances[i];
    obs.detections.push_back(d);
  }
  std::sort(obs.detections.begin(), obs.detections.end(),
            [](const Detection& a, const Detection& b) {
              if (a.rho != b.rho) return a.rho < b.rho;
              if (a.theta != b.theta) return a.theta < b.theta;
              return a.appearance_id < b.appearance_id;
            });
  obs.last_self_action = onehot_action(last_self_action);
  return obs;
}

}  // namespace dart
