#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dart/geometry.hpp"

namespace dart {

// The seven discrete commands shared by every agent.
enum class Action : int {
  NoOp = 0,
  Forward = 1,
  Backward = 2,
  TurnLeft = 3,
  TurnRight = 4,
  ForwardLeft = 5,
  ForwardRight = 6,
};

inline constexpr int kNumActions = 7;

enum class AgentKind { Tracker, Target, Distractor };

struct AgentState {
  Pose pose;
  double v_lin = 0.0;  // m/s, smoothed
  double v_ang = 0.0;  // rad/s, smoothed
  AgentKind kind = AgentKind::Tracker;
  double radius = 0.4;  // m
};

enum class Termination { Running, Lost, MaxLen };

// n_distractors value that asks reset() to draw uniformly from 0..4.
inline constexpr int kRandomDistractors = -1;

struct ArenaConfig {
  double dt = 0.1;                 // s
  double v_max_lin = 2.0;          // m/s
  double v_max_ang = kPi / 2.0;    // rad/s
  double alpha = 0.5;              // velocity smoothing factor, [0, 1)
  double arena_w = 12.0;           // m, bounds centered on the origin
  double arena_h = 12.0;           // m
  double fov_half_angle = kPi / 4.0;
  double fov_range = 7.5;          // m
  double agent_radius = 0.4;       // m
  int max_episode_steps = 500;
  int lost_limit_steps = 50;
  int n_distractors = kRandomDistractors;
};

// Index 0 is the tracker, index 1 the target, indices >= 2 distractors.
struct WorldState {
  std::vector<AgentState> agents;
  int step = 0;
  int lost_steps = 0;
  double bounds_half_w = 6.0;
  double bounds_half_h = 6.0;
  std::uint64_t rng_seed = 0;

  const AgentState& tracker() const { return agents[0]; }
  const AgentState& target() const { return agents[1]; }
  int n_distractors() const { return static_cast<int>(agents.size()) - 2; }
};

struct StepResult {
  std::vector<std::uint8_t> collided;  // one flag per agent
  Termination done = Termination::Running;
};

// Maps an action to (v_lin_cmd, v_ang_cmd). Throws std::invalid_argument on
// an out-of-range code.
std::pair<double, double> action_to_command(Action a, const ArenaConfig& cfg);

inline double smooth(double v_prev, double v_cmd, double alpha) {
  return alpha * v_prev + (1.0 - alpha) * v_cmd;
}

bool in_fov(const AgentState& observer, const AgentState& other,
            const ArenaConfig& cfg);

// Advances the world by one control step: smooth velocities, Euler-integrate
// poses, resolve collisions by reverting offenders, update the lost counter.
StepResult step(WorldState& world, const std::vector<Action>& actions,
                const ArenaConfig& cfg);

// Deterministic initial world: tracker at the center heading 0, target inside
// the FOV sector at rho in [1, 3], distractors uniform in free space.
WorldState reset(const ArenaConfig& cfg, std::uint64_t seed);

}  // namespace dart
