#pragma once

#include <algorithm>
#include <vector>

#include "dart/arena.hpp"
#include "dart/geometry.hpp"

namespace dart {

struct RewardParams {
  double rho_star = 2.5;          // m, expected target distance
  double theta_star = 0.0;        // rad, expected target bearing
  double rho_max = 5.0;           // m
  double theta_max = kPi / 2.0;   // rad
  double collision_penalty = -1.0;
};

struct RewardVector {
  double r1 = 0.0;             // tracker
  double r2 = 0.0;             // target
  std::vector<double> r3;      // one per distractor
};

// Tracker-centric relative distance, each term normalized and clipped to
// [0, 1] before summing, so the result lies in [0, 2].
inline double rel_distance(const PolarRel& rel, const RewardParams& p) {
  const double dr = std::clamp(std::abs(rel.rho - p.rho_star) / p.rho_max, 0.0, 1.0);
  const double dt = std::clamp(
      std::abs(wrap_angle(rel.theta - p.theta_star)) / p.theta_max, 0.0, 1.0);
  return dr + dt;
}

// r1 = 1 - d(1,2); r2 = -r1; r3[j] = r2 - d(1,j). A colliding agent gets the
// collision penalty added to its own component afterwards.
inline RewardVector compute_rewards(const WorldState& world,
                                    const std::vector<std::uint8_t>& collided,
                                    const RewardParams& p) {
  const Pose& tracker = world.agents[0].pose;
  RewardVector r;
  r.r1 = 1.0 - rel_distance(relative_pose(tracker, world.agents[1].pose), p);
  r.r2 = -r.r1;
  const int nd = world.n_distractors();
  r.r3.resize(nd);
  for (int j = 0; j < nd; ++j) {
    r.r3[j] =
        r.r2 - rel_distance(relative_pose(tracker, world.agents[2 + j].pose), p);
  }
  if (!collided.empty()) {
    if (collided[0]) r.r1 += p.collision_penalty;
    if (collided[1]) r.r2 += p.collision_penalty;
    for (int j = 0; j < nd; ++j) {
      if (collided[2 + j]) r.r3[j] += p.collision_penalty;
    }
  }
  return r;
}

}  // namespace dart
