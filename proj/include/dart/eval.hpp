#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dart/distill.hpp"
#include "dart/policy.hpp"
#include "dart/train.hpp"

namespace dart {

struct EpisodeMetrics {
  double ar = 0.0;       // summed tracker reward, collision penalties included
  int el = 0;            // steps
  bool success = false;  // reached max episode length
  int fov_distractor_steps = 0;  // steps with >= 1 distractor in tracker FOV
};

enum class OpponentKind { Nav, Meta };

struct BenchConfig {
  OpponentKind mode = OpponentKind::Nav;
  int distractors = 0;
  int episodes = 100;
  std::uint64_t seed = 0;

  std::string name() const {
    return (mode == OpponentKind::Nav ? "Nav-" : "Meta-") +
           std::to_string(distractors);
  }
};

struct BenchResult {
  std::vector<EpisodeMetrics> episodes;
  double ar_mean = 0.0;
  double el_mean = 0.0;
  double sr = 0.0;
};

struct EvalContext {
  TrainContext train;
  const ModelPool* pool = nullptr;  // required for Meta benches
  int workers = 1;
};

using ControllerFactory = std::function<std::unique_ptr<TrackerController>()>;

// Parses "Nav-2" / "Meta-0" style names.
BenchConfig parse_bench(const std::string& text);

// Runs bench.episodes episodes; episode i is seeded by (bench.seed, i) so the
// result does not depend on the worker count. Optional JSONL trace lines are
// emitted in episode order.
BenchResult run_benchmark(const ControllerFactory& make_controller,
                          const BenchConfig& bench, const EvalContext& ctx,
                          std::vector<std::string>* trace_lines = nullptr);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct SnapshotProbe {
  std::int64_t interactions = 0;
  double fov_frequency = 0.0;
  double sr = 0.0;
  double ar_mean = 0.0;
};

struct CurriculumProbeResult {
  std::vector<SnapshotProbe> snapshots;
  double spearman_fov_vs_index = 0.0;
};

// Replays every pool snapshot (2 distractors) against a fixed tracker and
// measures how often distractors enter its view.
CurriculumProbeResult curriculum_probe(const ControllerFactory& make_controller,
                                       const ModelPool& pool,
                                       const EvalContext& ctx,
                                       int episodes_per_snapshot,
                                       std::uint64_t seed);

struct AdversarialCurvePoint {
  std::int64_t x = 0;  // interactions at episode end (0 for baseline points)
  double y = 0.0;      // tracker episode reward
};

struct AdversarialTestResult {
  std::vector<std::vector<AdversarialCurvePoint>> per_seed;
  struct MeanPoint {
    double x = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
  };
  std::vector<MeanPoint> mean_curve;  // binned across seeds
};

// Freezes the controller, trains target + distractors against it from the
// pool's final snapshot, and logs the tracker's per-episode reward. A few
// no-update baseline episodes are recorded at x = 0 first, so a zero-budget
// run still reports the frozen baseline.
AdversarialTestResult adversarial_test(const ControllerFactory& make_controller,
                                       const ModelPool& pool,
                                       std::int64_t budget, int n_seeds,
                                       int n_distractors,
                                       const EvalContext& ctx,
                                       const RlConfig& rl_template,
                                       std::uint64_t seed);

struct AblationConfig {
  DistillConfig distill;  // budget shared by both trained arms
  RlConfig rl;            // w/o teacher-student arm (same total_steps)
  std::vector<BenchConfig> benches;
  std::uint64_t seed = 0;
};

struct AblationRow {
  std::string variant;
  std::string bench;
  double ar = 0.0;
  double el = 0.0;
  double sr = 0.0;
};

// (a) the supplied distilled student, (b) distillation with scripted
// opponents instead of the pool, (c) detection net trained directly by
// actor-critic against pool opponents.
std::vector<AblationRow> ablation_suite(const nn::PolicyNet& teacher,
                                        const ModelPool& pool,
                                        const nn::PolicyNet& full_student,
                                        const EvalContext& ctx,
                                        const AblationConfig& cfg);

}  // namespace dart
