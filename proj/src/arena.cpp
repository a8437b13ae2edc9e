#include "dart/arena.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dart/rng.hpp"

namespace dart {

std::pair<double, double> action_to_command(Action a, const ArenaConfig& cfg) {
  const double vl = cfg.v_max_lin;
  const double va = cfg.v_max_ang;
  switch (a) {
    case Action::NoOp:
      return {0.0, 0.0};
    case Action::Forward:
      return {vl, 0.0};
    case Action::Backward:
      return {-vl, 0.0};
    case Action::TurnLeft:
      return {0.0, va};
    case Action::TurnRight:
      return {0.0, -va};
    case Action::ForwardLeft:
      return {vl, va};
    case Action::ForwardRight:
      return {vl, -va};
  }
  throw std::invalid_argument("invalid action code " +
                              std::to_string(static_cast<int>(a)));
}

bool in_fov(const AgentState& observer, const AgentState& other,
            const ArenaConfig& cfg) {
  const PolarRel rel = relative_pose(observer.pose, other.pose);
  return rel.rho <= cfg.fov_range && std::abs(rel.theta) <= cfg.fov_half_angle;
}

namespace {

bool overlaps_wall(const AgentState& a, const WorldState& w) {
  return std::abs(a.pose.x) > w.bounds_half_w - a.radius ||
         std::abs(a.pose.y) > w.bounds_half_h - a.radius;
}

bool overlaps_agent(const AgentState& a, const AgentState& b) {
  const double dx = a.pose.x - b.pose.x;
  const double dy = a.pose.y - b.pose.y;
  const double rr = a.radius + b.radius;
  return dx * dx + dy * dy < rr * rr;
}

}  // namespace

StepResult step(WorldState& world, const std::vector<Action>& actions,
                const ArenaConfig& cfg) {
  const int n = static_cast<int>(world.agents.size());
  if (static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("expected " + std::to_string(n) +
                                " actions, got " +
                                std::to_string(actions.size()));
  }

  const std::vector<AgentState> pre = world.agents;

  for (int i = 0; i < n; ++i) {
    AgentState& a = world.agents[i];
    const auto [cmd_lin, cmd_ang] = action_to_command(actions[i], cfg);
    a.v_lin = smooth(a.v_lin, cmd_lin, cfg.alpha);
    a.v_ang = smooth(a.v_ang, cmd_ang, cfg.alpha);
    a.pose.x += a.v_lin * std::cos(a.pose.heading) * cfg.dt;
    a.pose.y += a.v_lin * std::sin(a.pose.heading) * cfg.dt;
    a.pose.heading = wrap_angle(a.pose.heading + a.v_ang * cfg.dt);
    a.pose.x = std::clamp(a.pose.x, -world.bounds_half_w, world.bounds_half_w);
    a.pose.y = std::clamp(a.pose.y, -world.bounds_half_h, world.bounds_half_h);
  }

  // Revert every overlapping agent to its pre-step pose. Reverting one agent
  // can expose a new overlap against an already-moved neighbor, so iterate in
  // synchronous rounds until stable; each round only adds reverted agents and
  // the pre-step configuration is overlap-free, so this terminates.
  StepResult out;
  out.collided.assign(n, 0);
  for (;;) {
    std::vector<int> newly;
    for (int i = 0; i < n; ++i) {
      if (out.collided[i]) continue;
      bool hit = overlaps_wall(world.agents[i], world);
      for (int j = 0; !hit && j < n; ++j) {
        if (j != i) hit = overlaps_agent(world.agents[i], world.agents[j]);
      }
      if (hit) newly.push_back(i);
    }
    if (newly.empty()) break;
    for (int i : newly) {
      world.agents[i].pose = pre[i].pose;
      world.agents[i].v_lin = 0.0;
      world.agents[i].v_ang = 0.0;
      out.collided[i] = 1;
    }
  }

  world.step += 1;
  if (in_fov(world.agents[0], world.agents[1], cfg)) {
    world.lost_steps = 0;
  } else {
    world.lost_steps += 1;
  }

  if (world.lost_steps >= cfg.lost_limit_steps) {
    out.done = Termination::Lost;
  } else if (world.step >= cfg.max_episode_steps) {
    out.done = Termination::MaxLen;
  }
  return out;
}

WorldState reset(const ArenaConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0);
  WorldState w;
  w.bounds_half_w = cfg.arena_w / 2.0;
  w.bounds_half_h = cfg.arena_h / 2.0;
  w.rng_seed = seed;

  AgentState tracker;
  tracker.pose = {0.0, 0.0, 0.0};
  tracker.kind = AgentKind::Tracker;
  tracker.radius = cfg.agent_radius;
  w.agents.push_back(tracker);

  AgentState target;
  const double rho = rng.uniform(1.0, 3.0);
  const double theta = rng.uniform(-cfg.fov_half_angle, cfg.fov_half_angle);
  target.pose.x = rho * std::cos(theta);
  target.pose.y = rho * std::sin(theta);
  target.pose.heading = wrap_angle(rng.uniform(-kPi, kPi));
  target.kind = AgentKind::Target;
  target.radius = cfg.agent_radius;
  w.agents.push_back(target);

  int n_distractors = cfg.n_distractors;
  if (n_distractors == kRandomDistractors) n_distractors = rng.uniform_int(5);
  for (int d = 0; d < n_distractors; ++d) {
    AgentState dis;
    dis.kind = AgentKind::Distractor;
    dis.radius = cfg.agent_radius;
    for (int tries = 0;; ++tries) {
      if (tries >= 1000)
        throw std::runtime_error("no free space for distractor placement");
      dis.pose.x = rng.uniform(-w.bounds_half_w + dis.radius,
                               w.bounds_half_w - dis.radius);
      dis.pose.y = rng.uniform(-w.bounds_half_h + dis.radius,
                               w.bounds_half_h - dis.radius);
      bool free = true;
      for (const AgentState& other : w.agents) {
        if (overlaps_agent(dis, other)) {
          free = false;
          break;
        }
      }
      if (free) break;
    }
    dis.pose.heading = wrap_angle(rng.uniform(-kPi, kPi));
    w.agents.push_back(dis);
  }
  return w;
}

}  // namespace dart
