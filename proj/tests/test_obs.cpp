#include <doctest.h>

#include <cmath>

#include "dart/obs.hpp"
#include "dart/rng.hpp"

using namespace dart;

namespace {

WorldState world_with(std::vector<Pose> poses) {
  WorldState w;
  w.bounds_half_w = w.bounds_half_h = 6.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    AgentState a;
    a.pose = poses[i];
    a.kind = i == 0   ? AgentKind::Tracker
             : i == 1 ? AgentKind::Target
                      : AgentKind::Distractor;
    w.agents.push_back(a);
  }
  return w;
}

}  // namespace

TEST_CASE("grounded_obs ordering and content") {
  ObsParams p;
  SUBCASE("two-agent world: tracker sees exactly the target") {
    WorldState w = world_with({{0, 0, 0}, {5, 0, 0}});
    const GroundedObservation obs = grounded_obs(w, 0, p);
    REQUIRE(obs.features.size() == 1);
    CHECK(obs.features[0].rho_norm == doctest::Approx(1.0));
    CHECK(obs.features[0].cos_theta == doctest::Approx(1.0));
    CHECK(obs.features[0].sin_theta == doctest::Approx(0.0));
    CHECK(obs.features[0].cos_phi == doctest::Approx(1.0));
    CHECK(obs.features[0].sin_phi == doctest::Approx(0.0));
    CHECK(obs.tracker_last_action.empty());
  }
  SUBCASE("target obs in a 4-agent world lists the tracker first") {
    WorldState w = world_with({{0, 0, 0}, {2, 0, 0}, {4, 0, 0}, {2, 1, 0}});
    const GroundedObservation obs = grounded_obs(w, 1, p, Action::Forward);
    REQUIRE(obs.features.size() == 3);
    // tracker is 2 m behind the target
    CHECK(obs.features[0].rho_norm == doctest::Approx(2.0 / 5.0));
    // distractors sorted by rho: (2,1) at distance 1 before (4,0) at 2
    CHECK(obs.features[1].rho_norm == doctest::Approx(1.0 / 5.0));
    CHECK(obs.features[2].rho_norm == doctest::Approx(2.0 / 5.0));
    REQUIRE(obs.tracker_last_action.size() == 7);
    CHECK(obs.tracker_last_action[1] == 1.0);
    double sum = 0;
    for (double v : obs.tracker_last_action) sum += v;
    CHECK(sum == 1.0);
  }
  SUBCASE("tracker obs: target first, then distractors by rho") {
    WorldState w = world_with({{0, 0, 0}, {4, 0, 0}, {3, 0, 0}, {1, 0, 0}});
    const GroundedObservation obs = grounded_obs(w, 0, p);
    REQUIRE(obs.features.size() == 3);
    CHECK(obs.features[0].rho_norm == doctest::Approx(0.8));  // target
    CHECK(obs.features[1].rho_norm == doctest::Approx(0.2));
    CHECK(obs.features[2].rho_norm == doctest::Approx(0.6));
  }
}

TEST_CASE("grounded_obs invariant under rigid motion") {
  ObsParams p;
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pose> poses;
    for (int i = 0; i < 4; ++i) {
      poses.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5),
                       wrap_angle(rng.uniform(-kPi, kPi))});
    }
    WorldState w = world_with(poses);
    const double tx = rng.uniform(-3, 3), ty = rng.uniform(-3, 3);
    const double rot = rng.uniform(-kPi, kPi);
    std::vector<Pose> moved;
    for (const Pose& q : poses) {
      moved.push_back({tx + q.x * std::cos(rot) - q.y * std::sin(rot),
                       ty + q.x * std::sin(rot) + q.y * std::cos(rot),
                       wrap_angle(q.heading + rot)});
    }
    WorldState w2 = world_with(moved);
    for (int agent = 0; agent < 4; ++agent) {
      const GroundedObservation a = grounded_obs(w, agent, p);
      const GroundedObservation b = grounded_obs(w2, agent, p);
      REQUIRE(a.features.size() == b.features.size());
      for (std::size_t k = 0; k < a.features.size(); ++k) {
        CHECK(std::abs(a.features[k].rho_norm - b.features[k].rho_norm) < 1e-9);
        CHECK(std::abs(a.features[k].cos_theta - b.features[k].cos_theta) < 1e-9);
        CHECK(std::abs(a.features[k].sin_theta - b.features[k].sin_theta) < 1e-9);
        CHECK(std::abs(a.features[k].cos_phi - b.features[k].cos_phi) < 1e-9);
        CHECK(std::abs(a.features[k].sin_phi - b.features[k].sin_phi) < 1e-9);
      }
    }
  }
}

TEST_CASE("detection_obs") {
  ArenaConfig arena;
  DetectionConfig det;
  SUBCASE("empty when nothing is in view") {
    WorldState w = world_with({{0, 0, 0}, {-4, 0, 0}});
    AppearanceMap ids{0, 1};
    Rng rng(1);
    const DetectionObservation obs =
        detection_obs(w, arena, det, ids, Action::NoOp, rng);
    CHECK(obs.detections.empty());
    REQUIRE(obs.last_self_action.size() == 7);
    CHECK(obs.last_self_action[0] == 1.0);
  }
  SUBCASE("zero noise passes rho/theta through") {
    WorldState w = world_with(
        {{0, 0, 0},
         {3.0 * std::cos(0.1), 3.0 * std::sin(0.1), 0.5}});
    DetectionConfig quiet = det;
    quiet.noise_std_rho = 0.0;
    quiet.noise_std_theta = 0.0;
    AppearanceMap ids{0, 2};
    Rng rng(1);
    const DetectionObservation obs =
        detection_obs(w, arena, quiet, ids, Action::Forward, rng);
    REQUIRE(obs.detections.size() == 1);
    CHECK(obs.detections[0].rho == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(obs.detections[0].theta == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(obs.detections[0].appearance_id == 2);
  }
  SUBCASE("detections sorted by rho, deterministic under seed") {
    WorldState w = world_with({{0, 0, 0}, {4, 0, 0}, {2, 0.5, 0}, {3, -1, 0}});
    AppearanceMap ids{0, 0, 1, 2};
    Rng r1(9), r2(9);
    const DetectionObservation a =
        detection_obs(w, arena, det, ids, Action::NoOp, r1);
    const DetectionObservation b =
        detection_obs(w, arena, det, ids, Action::NoOp, r2);
    REQUIRE(a.detections.size() == 3);
    for (std::size_t k = 1; k < a.detections.size(); ++k) {
      CHECK(a.detections[k - 1].rho <= a.detections[k].rho);
    }
    for (std::size_t k = 0; k < a.detections.size(); ++k) {
      CHECK(a.detections[k].rho == b.detections[k].rho);
      CHECK(a.detections[k].theta == b.detections[k].theta);
      CHECK(a.detections[k].appearance_id == b.detections[k].appearance_id);
    }
  }
  SUBCASE("zero-noise full-circle detections carry grounded rho/theta") {
    ArenaConfig wide;
    wide.fov_half_angle = kPi;  // full circle
    wide.fov_range = 100.0;
    DetectionConfig quiet;
    quiet.noise_std_rho = 0.0;
    quiet.noise_std_theta = 0.0;
    quiet.unique_appearances = true;
    quiet.appearance_pool = 3;
    WorldState w = world_with({{0, 0, 0.3}, {4, 1, 0}, {-2, 0.5, 0}, {3, -1, 0}});
    Rng ar(3);
    AppearanceMap ids = draw_appearances(w, quiet, ar);
    Rng rng(4);
    const DetectionObservation dobs =
        detection_obs(w, wide, quiet, ids, Action::NoOp, rng);
    const GroundedObservation gobs = grounded_obs(w, 0, ObsParams{});
    REQUIRE(dobs.detections.size() == 3);
    // Grounded features: target first then distractors by rho. Detections are
    // all sorted by rho. Compare as multisets of (rho, theta).
    std::vector<std::pair<double, double>> from_g, from_d;
    for (const EntityFeature& f : gobs.features) {
      from_g.emplace_back(f.rho_norm * 5.0,
                          std::atan2(f.sin_theta, f.cos_theta));
    }
    for (const Detection& d : dobs.detections) {
      from_d.emplace_back(d.rho, d.theta);
    }
    std::sort(from_g.begin(), from_g.end());
    std::sort(from_d.begin(), from_d.end());
    for (std::size_t k = 0; k < from_g.size(); ++k) {
      CHECK(std::abs(from_g[k].first - from_d[k].first) < 1e-9);
      CHECK(std::abs(from_g[k].second - from_d[k].second) < 1e-9);
    }
  }
}

TEST_CASE("appearance draws") {
  DetectionConfig det;
  det.appearance_pool = 2;
  WorldState w = world_with({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}});

  SUBCASE("all-share-one-id probability matches the combinatorial oracle") {
    // 4 entities, pool 2: P(all same) = 2 * (1/2)^4 = 0.125
    Rng rng(123);
    const int n = 40000;
    int all_same = 0;
    for (int i = 0; i < n; ++i) {
      const AppearanceMap ids = draw_appearances(w, det, rng);
      bool same = true;
      for (int k = 2; k <= 4; ++k) same = same && ids[k] == ids[1];
      all_same += same ? 1 : 0;
    }
    const double freq = static_cast<double>(all_same) / n;
    const double sigma = std::sqrt(0.125 * 0.875 / n);
    CHECK(std::abs(freq - 0.125) < 3.0 * sigma);
  }

  SUBCASE("unique mode never collides and checks pool size") {
    DetectionConfig uniq;
    uniq.unique_appearances = true;
    uniq.appearance_pool = 4;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const AppearanceMap ids = draw_appearances(w, uniq, rng);
      for (int a = 1; a <= 4; ++a) {
        for (int b = a + 1; b <= 4; ++b) CHECK(ids[a] != ids[b]);
      }
    }
    uniq.appearance_pool = 3;  // 4 entities cannot be unique from a pool of 3
    CHECK_THROWS(draw_appearances(w, uniq, rng));
  }
}
