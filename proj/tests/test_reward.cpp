#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dart/reward.hpp"
#include "dart/rng.hpp"

using namespace dart;

namespace {

// Independent scalar oracle for the relative-distance and reward block,
// written directly from the definitions. Kept free of any dart::reward call.
double oracle_distance(double rho, double theta, const RewardParams& p) {
  double dr = std::abs(rho - p.rho_star) / p.rho_max;
  if (dr > 1.0) dr = 1.0;
  double dtheta = theta - p.theta_star;
  while (dtheta > kPi) dtheta -= 2.0 * kPi;
  while (dtheta <= -kPi) dtheta += 2.0 * kPi;
  double dt = std::abs(dtheta) / p.theta_max;
  if (dt > 1.0) dt = 1.0;
  return dr + dt;
}

WorldState random_world(Rng& rng, int n_distractors) {
  WorldState w;
  w.bounds_half_w = w.bounds_half_h = 6.0;
  for (int i = 0; i < 2 + n_distractors; ++i) {
    AgentState a;
    a.pose = {rng.uniform(-6, 6), rng.uniform(-6, 6),
              wrap_angle(rng.uniform(-kPi, kPi))};
    a.kind = i == 0   ? AgentKind::Tracker
             : i == 1 ? AgentKind::Target
                      : AgentKind::Distractor;
    w.agents.push_back(a);
  }
  return w;
}

}  // namespace

TEST_CASE("rel_distance hand cases") {
  RewardParams p;  // rho*=2.5, theta*=0, rho_max=5, theta_max=pi/2
  CHECK(rel_distance({2.5, 0.0, 0.0}, p) == doctest::Approx(0.0));
  CHECK(rel_distance({5.0, kPi / 2, 0.0}, p) == doctest::Approx(1.5));
  CHECK(rel_distance({20.0, kPi, 0.0}, p) == doctest::Approx(2.0));
}

TEST_CASE("compute_rewards block") {
  RewardParams p;
  SUBCASE("target at the expected point") {
    WorldState w;
    w.agents.resize(2);
    w.agents[0].pose = {0, 0, 0};
    w.agents[1].pose = {2.5, 0, 0};
    const RewardVector r = compute_rewards(w, {0, 0}, p);
    CHECK(r.r1 == doctest::Approx(1.0));
    CHECK(r.r2 == doctest::Approx(-1.0));
    CHECK(r.r3.empty());
  }
  SUBCASE("one distractor at the expected point, d(1,2)=1.5") {
    WorldState w;
    w.agents.resize(3);
    w.agents[0].pose = {0, 0, 0};
    w.agents[1].pose = {0, 5.0, 0};  // rho 5, theta pi/2 -> d = 1.5
    w.agents[2].pose = {2.5, 0, 0};  // d = 0
    const RewardVector r = compute_rewards(w, {0, 0, 0}, p);
    CHECK(r.r1 == doctest::Approx(-0.5));
    CHECK(r.r2 == doctest::Approx(0.5));
    CHECK(r.r3[0] == doctest::Approx(0.5));

    // same but the distractor collided
    const RewardVector rc = compute_rewards(w, {0, 0, 1}, p);
    CHECK(rc.r3[0] == doctest::Approx(-0.5));
    CHECK(rc.r1 == doctest::Approx(r.r1));
    CHECK(rc.r2 == doctest::Approx(r.r2));
  }
}

TEST_CASE("reward algebra over random worlds") {
  RewardParams p;
  Rng rng(2024);
  for (int trial = 0; trial < 20000; ++trial) {
    WorldState w = random_world(rng, rng.uniform_int(5));
    const int n = static_cast<int>(w.agents.size());
    std::vector<std::uint8_t> flags(n, 0);
    for (int i = 0; i < n; ++i) flags[i] = rng.uniform() < 0.1 ? 1 : 0;

    std::vector<std::uint8_t> no_flags(n, 0);
    const RewardVector pre = compute_rewards(w, no_flags, p);
    CHECK(pre.r1 + pre.r2 == 0.0);  // exact zero-sum core
    CHECK(pre.r1 >= -1.0);
    CHECK(pre.r1 <= 1.0);
    for (double r3 : pre.r3) CHECK(r3 <= pre.r2);

    // oracle agreement
    const Pose& t = w.agents[0].pose;
    const PolarRel rel2 = relative_pose(t, w.agents[1].pose);
    const double d12 = oracle_distance(rel2.rho, rel2.theta, p);
    CHECK(std::abs(pre.r1 - (1.0 - d12)) < 1e-12);
    for (int j = 0; j < w.n_distractors(); ++j) {
      const PolarRel relj = relative_pose(t, w.agents[2 + j].pose);
      const double dj = oracle_distance(relj.rho, relj.theta, p);
      CHECK(std::abs(pre.r3[j] - (pre.r2 - dj)) < 1e-12);
    }

    // collision penalty lands only on the flagged agent's own component
    const RewardVector post = compute_rewards(w, flags, p);
    CHECK(post.r1 == pre.r1 + (flags[0] ? -1.0 : 0.0));
    CHECK(post.r2 == pre.r2 + (flags[1] ? -1.0 : 0.0));
    for (int j = 0; j < w.n_distractors(); ++j) {
      CHECK(post.r3[j] == pre.r3[j] + (flags[2 + j] ? -1.0 : 0.0));
    }
  }
}

TEST_CASE("r3 equals r2 exactly at the expected point") {
  RewardParams p;
  WorldState w;
  w.agents.resize(3);
  w.agents[0].pose = {1.0, -2.0, 0.7};
  // place both target and distractor somewhere, then pin the distractor to
  // the expected point in the tracker frame
  w.agents[1].pose = {4.0, 3.0, 0.0};
  const double ex = 1.0 + p.rho_star * std::cos(0.7 + p.theta_star);
  const double ey = -2.0 + p.rho_star * std::sin(0.7 + p.theta_star);
  w.agents[2].pose = {ex, ey, 0.0};
  const RewardVector r = compute_rewards(w, {0, 0, 0}, p);
  CHECK(r.r3[0] == doctest::Approx(r.r2).epsilon(1e-12));
}

TEST_CASE("r1 monotone in |rho - rho_star| at fixed theta") {
  RewardParams p;
  double prev = 2.0;
  for (double d = 0.0; d <= 6.0; d += 0.1) {
    const double r1 = 1.0 - rel_distance({p.rho_star + d, 0.3, 0.0}, p);
    CHECK(r1 <= prev + 1e-12);
    prev = r1;
  }
}
