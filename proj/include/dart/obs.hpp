#pragma once

#include <vector>

#include "dart/arena.hpp"
#include "dart/geometry.hpp"
#include "dart/rng.hpp"

namespace dart {

struct ObsParams {
  double rho_max = 5.0;  // normalizer for rho_norm features
};

// Identity-labeled entity features in a fixed order:
//   tracker observer:    [target, distractors by rho asc]
//   target observer:     [tracker, distractors by rho asc]
//   distractor observer: [tracker, target, other distractors by rho asc]
// tracker_last_action is a one-hot of the tracker's previous action, present
// only for target/distractor observations (empty for the tracker itself).
struct GroundedObservation {
  std::vector<EntityFeature> features;
  std::vector<double> tracker_last_action;
};

GroundedObservation grounded_obs(const WorldState& world, int agent_index,
                                 const ObsParams& p,
                                 Action tracker_last_action = Action::NoOp);

// Anonymous in-FOV detection: noisy polar coordinates plus an appearance id
// drawn per agent per episode. No identity labels.
struct Detection {
  double rho = 0.0;
  double theta = 0.0;
  int appearance_id = 0;
};

struct DetectionObservation {
  std::vector<Detection> detections;       // sorted by rho asc, ties by theta
  std::vector<double> last_self_action;    // one-hot, length 7
};

struct DetectionConfig {
  double noise_std_rho = 0.1;    // m
  double noise_std_theta = 0.02;  // rad
  int appearance_pool = 3;
  bool unique_appearances = false;  // draw ids without collision (needs n <= pool)
};

// Appearance id per agent index (entry 0, the tracker, is unused).
using AppearanceMap = std::vector<int>;

AppearanceMap draw_appearances(const WorldState& world,
                               const DetectionConfig& cfg, Rng& rng);

// Tracker-only observation: one Detection per in-FOV non-self agent with
// Gaussian noise on rho and theta.
DetectionObservation detection_obs(const WorldState& world,
                                   const ArenaConfig& arena,
                                   const DetectionConfig& cfg,
                                   const AppearanceMap& appearances,
                                   Action last_self_action, Rng& rng);

std::vector<double> onehot_action(Action a);

}  // namespace dart
