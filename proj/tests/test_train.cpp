#include <doctest.h>

#include <cmath>

#include "dart/errors.hpp"
#include "dart/nn/graph.hpp"
#include "dart/train.hpp"

using namespace dart;
using nn::GradBuffer;
using nn::Graph;
using nn::PolicyNet;
using nn::Vec;

namespace {

nn::NetSpec tiny_spec(int extra = 0) {
  nn::NetSpec s;
  s.entity_dim = 3;
  s.encoder_hidden = 2;
  s.cell_hidden = 3;
  s.extra_dim = extra;
  return s;
}

Vec rvec(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1, 1);
  return v;
}

RoleRollout random_rollout(const nn::NetSpec& spec, int steps, Rng& rng) {
  RoleRollout r;
  for (int t = 0; t < steps; ++t) {
    std::vector<Vec> ents;
    const int n_ents = rng.uniform_int(3);
    for (int e = 0; e < n_ents; ++e) ents.push_back(rvec(spec.entity_dim, rng));
    r.entities.push_back(std::move(ents));
    r.extras.push_back(spec.extra_dim > 0 ? rvec(spec.extra_dim, rng) : Vec());
    r.actions.push_back(rng.uniform_int(kNumActions));
    r.rewards.push_back(rng.uniform(-1, 1));
  }
  r.mem_start.h = Vec::Zero(spec.cell_hidden);
  r.mem_start.c = spec.cell == nn::CellKind::Lstm ? Vec::Zero(spec.cell_hidden)
                                                  : Vec();
  r.bootstrap = rng.uniform(-1, 1);
  return r;
}

}  // namespace

TEST_CASE("n_step_returns") {
  SUBCASE("hand recursion") {
    const auto r = n_step_returns({1.0, 1.0}, 0.0, 0.95);
    CHECK(r[0] == doctest::Approx(1.95).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zeros stay zero") {
    for (double v : n_step_returns({0, 0, 0, 0}, 0.0, 0.9)) CHECK(v == 0.0);
  }
  SUBCASE("single step bootstraps") {
    const auto r = n_step_returns({0.3}, 2.0, 0.9);
    CHECK(r[0] == doctest::Approx(0.3 + 0.9 * 2.0).epsilon(1e-12));
  }
  SUBCASE("matches brute-force discounted sums") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const int len = 1 + rng.uniform_int(50);
      std::vector<double> rewards;
      for (int i = 0; i < len; ++i) rewards.push_back(rng.uniform(-2, 2));
      const double bootstrap = rng.uniform(-2, 2);
      const double gamma = rng.uniform(0.5, 0.99);
      const auto fast = n_step_returns(rewards, bootstrap, gamma);
      for (int t = 0; t < len; ++t) {
        double brute = 0.0;
        double g = 1.0;
        for (int k = t; k < len; ++k) {
          brute += g * rewards[k];
          g *= gamma;
        }
        brute += g * bootstrap;
        CHECK(std::abs(fast[t] - brute) < 1e-12);
      }
    }
  }
}

TEST_CASE("reward normalizer") {
  SUBCASE("zeros map to zeros") {
    RewardNormalizer n;
    for (int i = 0; i < 10; ++i) CHECK(n.normalize(0.0) == 0.0);
  }
  SUBCASE("constant stream tends to +-1") {
    RewardNormalizer n;
    double last = 0.0;
    for (int i = 0; i < 1000; ++i) last = n.normalize(-3.5);
    CHECK(last == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(n.scale() == doctest::Approx(3.5).epsilon(1e-9));
  }
  SUBCASE("running scale converges to the std of N(0, 4)") {
    RewardNormalizer n;
    Rng rng(11);
    for (int i = 0; i < 100000; ++i) n.normalize(rng.normal(0.0, 2.0));
    CHECK(std::abs(n.scale() - 2.0) < 0.05);
  }
}

TEST_CASE("entropy term: value at uniform and stationarity") {
  // H(uniform over 7) = ln 7; the entropy bonus has zero gradient there.
  nn::ParameterSet ps;
  ps.add("z", kNumActions, 1);  // zero logits -> uniform softmax
  GradBuffer gb(ps);
  Graph g;
  const nn::ParamRef z{&ps.at("z"), &gb.at("z")};
  const int lp = g.log_softmax(g.param_vec(z));
  const int entropy = g.scale(g.dot(g.exp(lp), lp), -1.0);
  CHECK(g.scalar(entropy) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  const int neg_entropy = g.scale(entropy, -1.0);
  g.backward(neg_entropy);
  CHECK(gb.global_norm() < 1e-12);
}

TEST_CASE("actor-critic loss decomposition at exact value fit") {
  // Choose rewards so returns equal the critic's own values: advantages and
  // the value error vanish, leaving only the entropy term.
  Rng rng(3);
  nn::NetSpec spec = tiny_spec();
  PolicyNet net = PolicyNet::make(spec, rng);
  RlConfig cfg;
  cfg.gamma = 0.9;

  RoleRollout r = random_rollout(spec, 4, rng);
  // forward pass to read the values the update will see
  std::vector<double> values;
  {
    nn::MemoryState mem = net.initial_memory();
    for (std::size_t t = 0; t < r.size(); ++t) {
      const auto out = nn::forward(net, r.entities[t], r.extras[t], mem);
      values.push_back(out.value);
      mem = out.memory;
    }
  }
  r.bootstrap = 1.7;
  for (std::size_t t = 0; t < r.size(); ++t) {
    const double next = t + 1 < r.size() ? values[t + 1] : r.bootstrap;
    r.rewards[t] = values[t] - cfg.gamma * next;
  }

  GradBuffer grads(net.params);
  const LossBreakdown lb = actor_critic_update(net, grads, r, cfg, 0.01);
  CHECK(std::abs(lb.policy) < 1e-9);
  CHECK(std::abs(lb.value) < 1e-9);
  CHECK(lb.entropy > 0.0);
  CHECK(lb.total == doctest::Approx(-0.01 * lb.entropy).epsilon(1e-9));
}

TEST_CASE("actor-critic gradient matches finite differences") {
  // Returns and advantages are policy-gradient constants, so the oracle
  // freezes them from the unperturbed pass before differencing.
  for (nn::CellKind cell : {nn::CellKind::Lstm, nn::CellKind::Gru}) {
    CAPTURE(static_cast<int>(cell));
    Rng rng(21);
    nn::NetSpec spec = tiny_spec(2);
    spec.cell = cell;
    PolicyNet net = PolicyNet::make(spec, rng);
    REQUIRE(net.params.scalar_count() <= 500);
    RlConfig cfg;
    cfg.gamma = 0.95;
    const double entropy_w = 0.013;
    RoleRollout roll = random_rollout(spec, 3, rng);

    // frozen constants from the unperturbed pass
    std::vector<double> values;
    {
      nn::MemoryState mem = net.initial_memory();
      mem.h = roll.mem_start.h;
      mem.c = roll.mem_start.c;
      for (std::size_t t = 0; t < roll.size(); ++t) {
        const auto out = nn::forward(net, roll.entities[t], roll.extras[t], mem);
        values.push_back(out.value);
        mem = out.memory;
      }
    }
    const std::vector<double> returns =
        n_step_returns(roll.rewards, roll.bootstrap, cfg.gamma);
    std::vector<double> advantages(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) {
      advantages[t] = returns[t] - values[t];
    }

    GradBuffer grads(net.params);
    actor_critic_update(net, grads, roll, cfg, entropy_w);

    auto loss_at = [&]() {
      nn::MemoryState mem = net.initial_memory();
      mem.h = roll.mem_start.h;
      mem.c = roll.mem_start.c;
      double loss = 0.0;
      for (std::size_t t = 0; t < roll.size(); ++t) {
        const auto out = nn::forward(net, roll.entities[t], roll.extras[t], mem);
        mem = out.memory;
        double entropy = 0.0;
        for (double p : out.probs) {
          if (p > 0.0) entropy -= p * std::log(p);
        }
        loss += -std::log(out.probs[roll.actions[t]]) * advantages[t] +
                0.5 * (returns[t] - out.value) * (returns[t] - out.value) -
                entropy_w * entropy;
      }
      return loss;
    };

    const double h = 1e-5;
    double max_rel = 0.0;
    for (auto& [name, m] : net.params.entries()) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double orig = m.data()[i];
        m.data()[i] = orig + h;
        const double lp = loss_at();
        m.data()[i] = orig - h;
        const double lm = loss_at();
        m.data()[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double ad = grads.entries().at(name).data()[i];
        max_rel = std::max(
            max_rel, std::abs(ad - fd) /
                         std::max({std::abs(ad), std::abs(fd), 1e-3}));
      }
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("actor-critic rejects non-finite rewards") {
  Rng rng(9);
  nn::NetSpec spec = tiny_spec();
  PolicyNet net = PolicyNet::make(spec, rng);
  RoleRollout roll = random_rollout(spec, 3, rng);
  roll.rewards[1] = std::numeric_limits<double>::quiet_NaN();
  GradBuffer grads(net.params);
  RlConfig cfg;
  CHECK_THROWS_AS(actor_critic_update(net, grads, roll, cfg, 0.01),
                  DivergenceError);
}

namespace {

TrainContext small_ctx() {
  TrainContext ctx = default_train_context();
  ctx.tracker_spec.encoder_hidden = 8;
  ctx.tracker_spec.cell_hidden = 16;
  ctx.adversary_spec.encoder_hidden = 8;
  ctx.adversary_spec.cell_hidden = 16;
  ctx.student_spec.encoder_hidden = 8;
  ctx.student_spec.cell_hidden = 16;
  return ctx;
}

}  // namespace

TEST_CASE("selfplay is bit-reproducible with one worker") {
  TrainContext ctx = small_ctx();
  RlConfig cfg;
  cfg.total_steps = 2500;
  cfg.snapshot_interval = 1000;
  const SelfplayResult a = selfplay_train(ctx, cfg, 31);
  const SelfplayResult b = selfplay_train(ctx, cfg, 31);
  for (const auto& [name, m] : a.tracker.params.entries()) {
    CHECK((b.tracker.params.at(name) - m).norm() == 0.0);
  }
  for (const auto& [name, m] : a.target.params.entries()) {
    CHECK((b.target.params.at(name) - m).norm() == 0.0);
  }
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(a.log.rows[i].episode_reward == b.log.rows[i].episode_reward);
    CHECK(a.log.rows[i].step == b.log.rows[i].step);
  }
  CHECK(a.pool.size() == 2);  // floor(2500 / 1000)
  CHECK(a.pool.at(0).interaction_count == 1000);
  CHECK(a.pool.at(1).interaction_count == 2000);
}

TEST_CASE("finetune updates only the tracker against frozen opponents") {
  TrainContext ctx = small_ctx();
  Rng r1 = Rng::derive(1, 1);
  Rng r2 = Rng::derive(1, 2);
  Rng r3 = Rng::derive(1, 3);
  PolicyNet tracker = PolicyNet::make(ctx.tracker_spec, r1);
  ModelPool pool;
  pool.save(100, PolicyNet::make(ctx.adversary_spec, r2),
            PolicyNet::make(ctx.adversary_spec, r3));
  const nn::Mat target_before = pool.at(0).target.params.at("actor.W");
  const nn::Mat tracker_before = tracker.params.at("actor.W");

  RlConfig cfg;
  cfg.total_steps = 1500;
  cfg.snapshot_interval = 0;
  PolicyNet t1 = tracker;
  finetune_tracker(t1, pool, ctx, cfg, 77);
  CHECK((pool.at(0).target.params.at("actor.W") - target_before).norm() == 0.0);
  CHECK((t1.params.at("actor.W") - tracker_before).norm() > 0.0);

  // frozen-opponent contract: identical seeds replay identical episodes
  PolicyNet t2 = tracker;
  finetune_tracker(t2, pool, ctx, cfg, 77);
  for (const auto& [name, m] : t1.params.entries()) {
    CHECK((t2.params.at(name) - m).norm() == 0.0);
  }
}

TEST_CASE("smoke training improves the tracker" * doctest::timeout(600)) {
  // 20K-step self-play in a reduced arena; late mean episodic reward must
  // beat the mean over episodes finished in the first 1K interactions, in at
  // least 2 of 3 seeds.
  TrainContext ctx = default_train_context();
  ctx.arena.arena_w = 8.0;
  ctx.arena.arena_h = 8.0;
  ctx.tracker_spec.encoder_hidden = 16;
  ctx.tracker_spec.cell_hidden = 32;
  ctx.adversary_spec.encoder_hidden = 16;
  ctx.adversary_spec.cell_hidden = 32;
  RlConfig cfg;
  cfg.total_steps = 20000;
  cfg.snapshot_interval = 0;

  int improved = 0;
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    const SelfplayResult r = selfplay_train(ctx, cfg, seed);
    double baseline = 0.0;
    int baseline_n = 0;
    double late = 0.0;
    int late_n = 0;
    const auto& rows = r.log.rows;
    std::vector<std::pair<std::int64_t, double>> tracker_eps;
    for (const auto& row : rows) {
      if (row.role == "tracker") tracker_eps.emplace_back(row.step, row.episode_reward);
    }
    for (const auto& [step, reward] : tracker_eps) {
      if (step <= 1000) {
        baseline += reward;
        baseline_n += 1;
      }
    }
    const std::size_t tail = tracker_eps.size() / 4;
    for (std::size_t i = tracker_eps.size() - tail; i < tracker_eps.size(); ++i) {
      late += tracker_eps[i].second;
      late_n += 1;
    }
    REQUIRE(baseline_n > 0);
    REQUIRE(late_n > 0);
    if (late / late_n > baseline / baseline_n) improved += 1;
  }
  CHECK(improved >= 2);
}

TEST_CASE("synchronous multi-worker rounds are reproducible") {
  TrainContext ctx = small_ctx();
  RlConfig cfg;
  cfg.total_steps = 1600;
  cfg.snapshot_interval = 0;
  cfg.workers = 2;
  cfg.sync_workers = true;
  const SelfplayResult a = selfplay_train(ctx, cfg, 91);
  const SelfplayResult b = selfplay_train(ctx, cfg, 91);
  for (const auto& [name, m] : a.tracker.params.entries()) {
    CHECK((b.tracker.params.at(name) - m).norm() == 0.0);
  }
  for (const auto& [name, m] : a.distractor.params.entries()) {
    CHECK((b.distractor.params.at(name) - m).norm() == 0.0);
  }
}

TEST_CASE("asynchronous workers finish and keep parameters finite") {
  TrainContext ctx = small_ctx();
  RlConfig cfg;
  cfg.total_steps = 1600;
  cfg.snapshot_interval = 500;
  cfg.workers = 2;
  cfg.sync_workers = false;
  const SelfplayResult r = selfplay_train(ctx, cfg, 92);
  CHECK(r.tracker.params.all_finite());
  CHECK(r.target.params.all_finite());
  CHECK(r.pool.size() >= 3);  // counter overshoot can add at most one window
  CHECK(!r.log.rows.empty());
}
