#include "dart/eval.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "dart/errors.hpp"

namespace dart {

using nn::MemoryState;
using nn::PolicyNet;
using nn::Vec;

BenchConfig parse_bench(const std::string& text) {
  BenchConfig b;
  std::string rest;
  if (text.rfind("Nav-", 0) == 0) {
    b.mode = OpponentKind::Nav;
    rest = text.substr(4);
  } else if (text.rfind("Meta-", 0) == 0) {
    b.mode = OpponentKind::Meta;
    rest = text.substr(5);
  } else {
    throw ConfigError("bench must look like Nav-2 or Meta-0, got '" + text +
                      "'");
  }
  try {
    b.distractors = std::stoi(rest);
  } catch (...) {
    throw ConfigError("bad distractor count in bench '" + text + "'");
  }
  if (b.distractors < 0 || b.distractors > 4) {
    throw ConfigError("bench distractor count must be 0..4");
  }
  return b;
}

namespace {

enum : std::uint64_t {
  kStreamAppearance = 1,
  kStreamDetection = 2,
  kStreamTrackerAct = 3,
  kStreamTargetAct = 4,
  kStreamDistractorAct = 5,
  kStreamNavigator = 20,
  kStreamPoolSample = 50,
};

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Running:
      return "running";
    case Termination::Lost:
      return "lost";
    case Termination::MaxLen:
      return "max_len";
  }
  return "running";
}

// Target + distractors for one evaluation episode: scripted navigators or a
// frozen snapshot's nets.
struct Opponents {
  bool scripted = true;
  const PoolSnapshot* snapshot = nullptr;
  std::vector<NavigatorState> navs;
  Rng nav_rng{0};
  MemoryState target_mem;
  std::vector<MemoryState> distractor_mems;
  Rng target_rng{0};
  std::vector<Rng> distractor_rngs;

  void begin(const WorldState& world, std::uint64_t ep_seed,
             const PoolSnapshot* snap) {
    const int nd = world.n_distractors();
    snapshot = snap;
    scripted = snap == nullptr;
    if (scripted) {
      navs.assign(1 + nd, NavigatorState{});
      nav_rng = Rng::derive(ep_seed, kStreamNavigator);
    } else {
      target_mem = snapshot->target.initial_memory();
      target_rng = Rng::derive(ep_seed, kStreamTargetAct);
      distractor_mems.assign(nd, snapshot->distractor.initial_memory());
      distractor_rngs.clear();
      for (int j = 0; j < nd; ++j) {
        distractor_rngs.push_back(Rng::derive(ep_seed, kStreamDistractorAct + j));
      }
    }
  }

  void act(const WorldState& world, Action tracker_last, const ObsParams& obs,
           const NavigatorConfig& nav_cfg, std::vector<Action>& actions) {
    const int n = static_cast<int>(world.agents.size());
    if (scripted) {
      for (int i = 1; i < n; ++i) {
        actions[i] = navigator_act(navs[i - 1], world.agents[i].pose, world,
                                   nav_cfg, nav_rng);
      }
      return;
    }
    {
      const GroundedObservation o = grounded_obs(world, 1, obs, tracker_last);
      const ActResult ar = neural_act(snapshot->target, grounded_entities(o),
                                      extra_from(o.tracker_last_action),
                                      target_mem, ActMode::Sample, target_rng);
      actions[1] = ar.action;
      target_mem = ar.net.memory;
    }
    for (int j = 0; j < world.n_distractors(); ++j) {
      const GroundedObservation o =
          grounded_obs(world, 2 + j, obs, tracker_last);
      const ActResult ar = neural_act(
          snapshot->distractor, grounded_entities(o),
          extra_from(o.tracker_last_action), distractor_mems[j],
          ActMode::Sample, distractor_rngs[j]);
      actions[2 + j] = ar.action;
      distractor_mems[j] = ar.net.memory;
    }
  }
};

EpisodeMetrics run_episode(const EvalContext& ctx,
                           TrackerController& controller, int distractors,
                           const PoolSnapshot* snapshot, std::uint64_t ep_seed,
                           std::vector<std::string>* trace) {
  ArenaConfig arena = ctx.train.arena;
  arena.n_distractors = distractors;
  WorldState world = reset(arena, ep_seed);

  Rng arng = Rng::derive(ep_seed, kStreamAppearance);
  const AppearanceMap appearances =
      draw_appearances(world, ctx.train.detection, arng);
  Rng det_rng = Rng::derive(ep_seed, kStreamDetection);
  Rng act_rng = Rng::derive(ep_seed, kStreamTrackerAct);

  controller.begin_episode(ep_seed);
  Opponents opponents;
  opponents.begin(world, ep_seed, snapshot);

  EpisodeMetrics m;
  Action last_tracker_action = Action::NoOp;
  for (;;) {
    const GroundedObservation gobs = grounded_obs(world, 0, ctx.train.obs);
    const DetectionObservation dobs =
        detection_obs(world, arena, ctx.train.detection, appearances,
                      last_tracker_action, det_rng);
    const int n = static_cast<int>(world.agents.size());
    std::vector<Action> actions(n, Action::NoOp);
    actions[0] = controller.act(world, gobs, dobs, act_rng);
    opponents.act(world, last_tracker_action, ctx.train.obs, ctx.train.nav,
                  actions);

    const StepResult sr = step(world, actions, arena);
    const RewardVector rv =
        compute_rewards(world, sr.collided, ctx.train.reward);
    last_tracker_action = actions[0];

    m.ar += rv.r1;
    m.el += 1;
    for (int j = 0; j < world.n_distractors(); ++j) {
      if (in_fov(world.agents[0], world.agents[2 + j], arena)) {
        m.fov_distractor_steps += 1;
        break;
      }
    }

    if (trace != nullptr) {
      nlohmann::json rec;
      rec["step"] = world.step;
      auto poses = nlohmann::json::array();
      for (const AgentState& a : world.agents) {
        poses.push_back({a.pose.x, a.pose.y, a.pose.heading});
      }
      rec["poses"] = std::move(poses);
      auto acts = nlohmann::json::array();
      for (Action a : actions) acts.push_back(static_cast<int>(a));
      rec["actions"] = std::move(acts);
      auto rewards = nlohmann::json::array();
      rewards.push_back(rv.r1);
      rewards.push_back(rv.r2);
      for (double r : rv.r3) rewards.push_back(r);
      rec["rewards"] = std::move(rewards);
      auto flags = nlohmann::json::array();
      for (std::uint8_t f : sr.collided) flags.push_back(static_cast<int>(f));
      rec["collided"] = std::move(flags);
      rec["lost_steps"] = world.lost_steps;
      rec["done"] = termination_name(sr.done);
      trace->push_back(rec.dump());
    }

    if (sr.done != Termination::Running) {
      m.success = sr.done == Termination::MaxLen;
      break;
    }
  }
  return m;
}

void aggregate(BenchResult& r) {
  double ar = 0.0, el = 0.0, wins = 0.0;
  for (const EpisodeMetrics& m : r.episodes) {
    ar += m.ar;
    el += m.el;
    wins += m.success ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(r.episodes.size());
  r.ar_mean = n > 0 ? ar / n : 0.0;
  r.el_mean = n > 0 ? el / n : 0.0;
  r.sr = n > 0 ? wins / n : 0.0;
}

}  // namespace

BenchResult run_benchmark(const ControllerFactory& make_controller,
                          const BenchConfig& bench, const EvalContext& ctx,
                          std::vector<std::string>* trace_lines) {
  if (bench.mode == OpponentKind::Meta &&
      (ctx.pool == nullptr || ctx.pool->empty())) {
    throw MissingArtifactError("Meta bench needs a non-empty model pool");
  }

  BenchResult out;
  out.episodes.resize(bench.episodes);
  std::vector<std::vector<std::string>> traces(
      trace_lines != nullptr ? bench.episodes : 0);

  const int workers = std::max(1, ctx.workers);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (int e = 0; e < bench.episodes; ++e) {
    const std::uint64_t ep_seed =
        splitmix64(bench.seed ^ splitmix64(static_cast<std::uint64_t>(e)));
    const PoolSnapshot* snap = nullptr;
    if (bench.mode == OpponentKind::Meta) {
      Rng prng = Rng::derive(ep_seed, kStreamPoolSample);
      snap = &ctx.pool->sample(prng);
    }
    const std::unique_ptr<TrackerController> controller = make_controller();
    out.episodes[e] =
        run_episode(ctx, *controller, bench.distractors, snap, ep_seed,
                    trace_lines != nullptr ? &traces[e] : nullptr);
  }

  if (trace_lines != nullptr) {
    for (auto& t : traces) {
      for (auto& line : t) trace_lines->push_back(std::move(line));
    }
  }
  aggregate(out);
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return 0.0;
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

CurriculumProbeResult curriculum_probe(const ControllerFactory& make_controller,
                                       const ModelPool& pool,
                                       const EvalContext& ctx,
                                       int episodes_per_snapshot,
                                       std::uint64_t seed) {
  if (pool.empty()) throw MissingArtifactError("empty model pool");
  CurriculumProbeResult out;
  const int workers = std::max(1, ctx.workers);

  for (std::size_t s = 0; s < pool.size(); ++s) {
    const PoolSnapshot& snap = pool.at(s);
    std::vector<EpisodeMetrics> metrics(episodes_per_snapshot);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (int e = 0; e < episodes_per_snapshot; ++e) {
      const std::uint64_t ep_seed = splitmix64(
          seed ^ splitmix64(s * 1000003ULL + static_cast<std::uint64_t>(e)));
      const std::unique_ptr<TrackerController> controller = make_controller();
      metrics[e] = run_episode(ctx, *controller, 2, &snap, ep_seed, nullptr);
    }
    SnapshotProbe probe;
    probe.interactions = snap.interaction_count;
    std::int64_t steps = 0, fov = 0;
    double wins = 0, ar = 0;
    for (const EpisodeMetrics& m : metrics) {
      steps += m.el;
      fov += m.fov_distractor_steps;
      wins += m.success ? 1 : 0;
      ar += m.ar;
    }
    probe.fov_frequency =
        steps > 0 ? static_cast<double>(fov) / static_cast<double>(steps) : 0.0;
    probe.sr = wins / episodes_per_snapshot;
    probe.ar_mean = ar / episodes_per_snapshot;
    out.snapshots.push_back(probe);
  }

  std::vector<double> idx, freq;
  for (std::size_t s = 0; s < out.snapshots.size(); ++s) {
    idx.push_back(static_cast<double>(s));
    freq.push_back(out.snapshots[s].fov_frequency);
  }
  out.spearman_fov_vs_index = spearman(idx, freq);
  return out;
}

AdversarialTestResult adversarial_test(const ControllerFactory& make_controller,
                                       const ModelPool& pool,
                                       std::int64_t budget, int n_seeds,
                                       int n_distractors,
                                       const EvalContext& ctx,
                                       const RlConfig& rl_template,
                                       std::uint64_t seed) {
  if (pool.empty()) throw MissingArtifactError("empty model pool");
  AdversarialTestResult out;
  constexpr int kBaselineEpisodes = 5;

  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t run_seed =
        splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s) + 101));
    std::vector<AdversarialCurvePoint> curve;

    // frozen baseline against the unmodified meta adversaries
    const PoolSnapshot& last = pool.back();
    for (int e = 0; e < kBaselineEpisodes; ++e) {
      const std::unique_ptr<TrackerController> controller = make_controller();
      const EpisodeMetrics m = run_episode(
          ctx, *controller, n_distractors, &last,
          splitmix64(run_seed ^ splitmix64(7000 + e)), nullptr);
      curve.push_back(AdversarialCurvePoint{0, m.ar});
    }

    if (budget > 0) {
      RlConfig rl = rl_template;
      rl.total_steps = budget;
      rl.snapshot_interval = 0;  // no pool writes during adversarial runs
      const std::unique_ptr<TrackerController> frozen = make_controller();
      AdversarialRunResult run =
          adversarial_train(*frozen, last.target, last.distractor,
                            n_distractors, ctx.train, rl, run_seed);
      for (std::size_t e = 0; e < run.tracker_episode_rewards.size(); ++e) {
        curve.push_back(AdversarialCurvePoint{
            run.episode_end_interactions[e], run.tracker_episode_rewards[e]});
      }
    }
    out.per_seed.push_back(std::move(curve));
  }

  // binned mean +- standard error across seeds
  constexpr int kBins = 20;
  const double hi = static_cast<double>(std::max<std::int64_t>(budget, 1));
  for (int b = 0; b < kBins; ++b) {
    const double lo_x = hi * b / kBins;
    const double hi_x = hi * (b + 1) / kBins;
    std::vector<double> seed_means;
    for (const auto& curve : out.per_seed) {
      double sum = 0;
      int count = 0;
      for (const AdversarialCurvePoint& p : curve) {
        const double x = static_cast<double>(p.x);
        if ((x >= lo_x || (b == 0 && p.x == 0)) && x < hi_x) {
          sum += p.y;
          count += 1;
        }
      }
      if (count > 0) seed_means.push_back(sum / count);
    }
    if (seed_means.empty()) continue;
    double mean = 0;
    for (double v : seed_means) mean += v;
    mean /= static_cast<double>(seed_means.size());
    double var = 0;
    for (double v : seed_means) var += (v - mean) * (v - mean);
    const double stderr_ =
        seed_means.size() > 1
            ? std::sqrt(var / (seed_means.size() - 1)) /
                  std::sqrt(static_cast<double>(seed_means.size()))
            : 0.0;
    out.mean_curve.push_back(
        AdversarialTestResult::MeanPoint{0.5 * (lo_x + hi_x), mean, stderr_});
  }
  return out;
}

std::vector<AblationRow> ablation_suite(const PolicyNet& teacher,
                                        const ModelPool& pool,
                                        const PolicyNet& full_student,
                                        const EvalContext& ctx,
                                        const AblationConfig& cfg) {
  // (b) distillation with scripted opponents (no multi-agent curriculum)
  DistillConfig no_curriculum = cfg.distill;
  no_curriculum.scripted_opponents = true;
  const DistillResult arm_b = distill_train(
      teacher, nullptr, ctx.train, no_curriculum,
      splitmix64(cfg.seed ^ 0x5151515151ULL));

  // (c) detection net trained directly by actor-critic at the same budget
  RlConfig rl = cfg.rl;
  rl.total_steps = cfg.distill.total_steps;
  rl.snapshot_interval = 0;
  TrainContext tctx = ctx.train;
  tctx.arena.n_distractors = cfg.distill.n_distractors;
  Rng mk = Rng::derive(cfg.seed, 424242);
  PolicyNet arm_c = PolicyNet::make(ctx.train.student_spec, mk);
  rl_from_detections(arm_c, &pool, tctx, rl,
                     splitmix64(cfg.seed ^ 0x727272727ULL));

  std::vector<AblationRow> rows;
  const struct {
    const char* name;
    const PolicyNet* net;
  } variants[] = {{"full", &full_student},
                  {"wo_curriculum", &arm_b.student},
                  {"wo_teacher_student", &arm_c}};
  for (const auto& v : variants) {
    for (const BenchConfig& bench : cfg.benches) {
      const BenchResult r = run_benchmark(
          [&]() {
            return std::make_unique<StudentController>(
                *v.net, ActMode::Sample, ctx.train.obs.rho_max,
                ctx.train.detection.appearance_pool);
          },
          bench, ctx, nullptr);
      rows.push_back(AblationRow{v.name, bench.name(), r.ar_mean, r.el_mean,
                                 r.sr});
    }
  }
  return rows;
}

}  // namespace dart
