// dart: 2D multi-agent active-tracking arena and learning toolkit.
//
// Subcommands cover the full pipeline: self-play meta training, tracker
// fine-tuning, teacher-student distillation, benchmark evaluation,
// curriculum probing, adversarial testing, and trace replay.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "dart/config.hpp"
#include "dart/distill.hpp"
#include "dart/errors.hpp"
#include "dart/eval.hpp"
#include "dart/io.hpp"
#include "dart/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: keep the config's value
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides,
                  "config override like rl.lr=0.001 (repeatable)");
  cmd->add_option("--seed", o.seed, "root random seed")->capture_default_str();
  cmd->add_option("--workers", o.workers,
                  "worker count override (1 = deterministic)");
  cmd->add_option("--out", o.out, "output directory");
}

dart::FullConfig resolve_config(const CommonOpts& o) {
  dart::FullConfig cfg = o.config_path.empty()
                             ? dart::default_config()
                             : dart::load_config_file(o.config_path);
  cfg = dart::apply_overrides(cfg, o.overrides);
  if (o.workers > 0) {
    cfg.rl.workers = o.workers;
    cfg.finetune.workers = o.workers;
    cfg.distill.samplers = o.workers;
  }
  return cfg;
}

fs::path make_run_dir(const std::string& command, const CommonOpts& o) {
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    return o.out;
  }
  fs::path root;
  if (const char* env = std::getenv("DART_ARENA_DATA_DIR")) {
    root = env;
  } else {
    root = "dart-runs";
  }
  std::string stamp = dart::utc_now_iso();
  for (char& c : stamp) {
    if (c == ':') c = '-';
  }
  const fs::path dir =
      root / (command + "-seed" + std::to_string(o.seed) + "-" + stamp);
  fs::create_directories(dir);
  return dir;
}

dart::RunManifest start_manifest(const std::string& command,
                                 const dart::FullConfig& cfg,
                                 const CommonOpts& o) {
  dart::RunManifest m;
  m.command = command;
  m.config = dart::config_to_json(cfg);
  m.seed = o.seed;
  m.started_utc = dart::utc_now_iso();
  m.run_id = command + "-" + std::to_string(o.seed) + "-" + m.started_utc;
  return m;
}

void add_input(dart::RunManifest& m, const fs::path& path) {
  m.input_hashes[path.string()] = dart::nn::file_content_hash(path);
}

void finish_manifest(dart::RunManifest& m, const fs::path& dir) {
  m.finished_utc = dart::utc_now_iso();
  dart::write_manifest(m, dir);
}

dart::nn::PolicyNet load_net(const std::string& path) {
  if (path.empty()) {
    throw dart::MissingArtifactError("a required checkpoint path is missing");
  }
  return dart::nn::load_checkpoint(path);
}

dart::ActMode parse_mode(const std::string& s) {
  if (s == "sample") return dart::ActMode::Sample;
  if (s == "greedy") return dart::ActMode::Greedy;
  throw dart::ConfigError("--mode must be sample or greedy, got '" + s + "'");
}

// Builds the tracker-controller factory used by eval/adv-test.
dart::ControllerFactory controller_factory(const std::string& kind,
                                           const std::string& ckpt,
                                           dart::ActMode mode,
                                           const dart::FullConfig& cfg,
                                           dart::nn::PolicyNet& net_slot,
                                           dart::RunManifest& manifest) {
  if (kind == "random") {
    return [] { return std::make_unique<dart::RandomController>(); };
  }
  if (kind == "pid") {
    const dart::PidParams pid = cfg.pid;
    const dart::RewardParams reward = cfg.reward;
    return [pid, reward] {
      return std::make_unique<dart::PidController>(pid, reward);
    };
  }
  if (kind == "teacher" || kind == "student") {
    net_slot = load_net(ckpt);
    add_input(manifest, ckpt);
    if (kind == "teacher") {
      return [&net_slot, mode] {
        return std::make_unique<dart::TeacherController>(net_slot, mode);
      };
    }
    const int expected = 3 + cfg.detection.appearance_pool;
    if (net_slot.spec.entity_dim != expected) {
      throw dart::ConfigError(
          "student checkpoint entity size " +
          std::to_string(net_slot.spec.entity_dim) +
          " does not match detection.appearance_pool (expected " +
          std::to_string(expected) + ")");
    }
    const double rho_max = cfg.obs.rho_max;
    const int pool = cfg.detection.appearance_pool;
    return [&net_slot, mode, rho_max, pool] {
      return std::make_unique<dart::StudentController>(net_slot, mode, rho_max,
                                                       pool);
    };
  }
  throw dart::ConfigError(
      "--controller must be one of student|teacher|pid|random, got '" + kind +
      "'");
}

const char* action_name(int code) {
  static const char* names[] = {"no-op",        "forward",      "backward",
                                "turn-left",    "turn-right",   "forward-left",
                                "forward-right"};
  return code >= 0 && code < 7 ? names[code] : "?";
}

// --- command bodies ---------------------------------------------------------

int cmd_train_meta(const CommonOpts& o) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("train-meta", o);
  dart::RunManifest manifest = start_manifest("train-meta", cfg, o);

  try {
    const dart::SelfplayResult result =
        dart::selfplay_train(cfg.to_train_context(), cfg.rl, o.seed);
    dart::nn::save_checkpoint(dir / "tracker.ckpt", result.tracker);
    dart::nn::save_checkpoint(dir / "target.ckpt", result.target);
    dart::nn::save_checkpoint(dir / "distractor.ckpt", result.distractor);
    result.pool.persist(dir / "pool");
    dart::write_training_csv(result.log, dir / "training_log.csv");
    manifest.outputs = {"tracker.ckpt", "target.ckpt", "distractor.ckpt",
                        "pool", "training_log.csv"};
    finish_manifest(manifest, dir);
    std::cout << "pool snapshots: " << result.pool.size() << "\n"
              << "run dir: " << dir.string() << "\n";
    return 0;
  } catch (const dart::DivergenceError&) {
    // parameters are still the last finite state; keep them for inspection
    finish_manifest(manifest, dir);
    throw;
  }
}

int cmd_finetune(const CommonOpts& o, const std::string& tracker_path,
                 const std::string& pool_path) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("finetune", o);
  dart::RunManifest manifest = start_manifest("finetune", cfg, o);
  dart::nn::PolicyNet tracker = load_net(tracker_path);
  add_input(manifest, tracker_path);
  const dart::ModelPool pool = dart::ModelPool::load(pool_path);
  add_input(manifest, fs::path(pool_path) / "pool_index.json");

  const dart::TrainingLog log = dart::finetune_tracker(
      tracker, pool, cfg.to_train_context(), cfg.finetune, o.seed);
  dart::nn::save_checkpoint(dir / "tracker_finetuned.ckpt", tracker);
  dart::write_training_csv(log, dir / "training_log.csv");
  manifest.outputs = {"tracker_finetuned.ckpt", "training_log.csv"};
  finish_manifest(manifest, dir);
  std::cout << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_distill(const CommonOpts& o, const std::string& teacher_path,
                const std::string& pool_path) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("distill", o);
  dart::RunManifest manifest = start_manifest("distill", cfg, o);
  const dart::nn::PolicyNet teacher = load_net(teacher_path);
  add_input(manifest, teacher_path);
  dart::ModelPool pool;
  if (!cfg.distill.scripted_opponents) {
    pool = dart::ModelPool::load(pool_path);
    add_input(manifest, fs::path(pool_path) / "pool_index.json");
  }

  const dart::DistillResult result = dart::distill_train(
      teacher, cfg.distill.scripted_opponents ? nullptr : &pool,
      cfg.to_train_context(), cfg.distill, o.seed);
  dart::nn::save_checkpoint(dir / "student.ckpt", result.student);
  dart::write_distill_csv(result.log, dir / "distill_log.csv");
  manifest.outputs = {"student.ckpt", "distill_log.csv"};
  finish_manifest(manifest, dir);
  std::cout << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& controller,
             const std::string& ckpt, const std::string& bench_name,
             int episodes, const std::string& mode_name,
             const std::string& pool_path, bool traces) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("eval", o);
  dart::RunManifest manifest = start_manifest("eval", cfg, o);

  dart::BenchConfig bench = dart::parse_bench(bench_name);
  bench.episodes = episodes > 0 ? episodes : cfg.eval.episodes;
  bench.seed = o.seed;

  dart::ModelPool pool;
  dart::EvalContext ctx{cfg.to_train_context(), nullptr,
                        o.workers > 0 ? o.workers : 1};
  if (bench.mode == dart::OpponentKind::Meta) {
    pool = dart::ModelPool::load(pool_path);
    add_input(manifest, fs::path(pool_path) / "pool_index.json");
    ctx.pool = &pool;
  }

  dart::nn::PolicyNet net_slot;
  const dart::ControllerFactory factory = controller_factory(
      controller, ckpt, parse_mode(mode_name), cfg, net_slot, manifest);

  std::vector<std::string> trace_lines;
  const dart::BenchResult result = dart::run_benchmark(
      factory, bench, ctx, traces ? &trace_lines : nullptr);

  dart::write_bench_csv(result, dir / "results.csv");
  dart::write_bench_summary(result, bench, controller, dir / "summary.json");
  manifest.outputs = {"results.csv", "summary.json"};
  if (traces) {
    dart::write_lines(dir / "traces.jsonl", trace_lines);
    manifest.outputs.push_back("traces.jsonl");
  }
  finish_manifest(manifest, dir);
  std::cout << bench.name() << " " << controller << ": AR=" << result.ar_mean
            << " EL=" << result.el_mean << " SR=" << result.sr << "\n"
            << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_adv_test(const CommonOpts& o, const std::string& controller,
                 const std::string& ckpt, const std::string& pool_path,
                 std::int64_t budget, int seeds, const std::string& mode_name) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("adv-test", o);
  dart::RunManifest manifest = start_manifest("adv-test", cfg, o);
  const dart::ModelPool pool = dart::ModelPool::load(pool_path);
  add_input(manifest, fs::path(pool_path) / "pool_index.json");

  dart::EvalContext ctx{cfg.to_train_context(), &pool,
                        o.workers > 0 ? o.workers : 1};
  dart::nn::PolicyNet net_slot;
  const dart::ControllerFactory factory = controller_factory(
      controller, ckpt, parse_mode(mode_name), cfg, net_slot, manifest);

  const std::int64_t use_budget = budget >= 0 ? budget : cfg.eval.adv_budget;
  const int use_seeds = seeds > 0 ? seeds : cfg.eval.adv_seeds;
  const dart::AdversarialTestResult result = dart::adversarial_test(
      factory, pool, use_budget, use_seeds, cfg.eval.adv_distractors, ctx,
      cfg.rl, o.seed);

  std::vector<dart::LongRow> rows;
  for (std::size_t s = 0; s < result.per_seed.size(); ++s) {
    for (const auto& p : result.per_seed[s]) {
      rows.push_back(dart::LongRow{"reward", static_cast<double>(p.x), p.y,
                                   static_cast<std::int64_t>(s)});
    }
  }
  for (const auto& p : result.mean_curve) {
    rows.push_back(dart::LongRow{"reward_mean", p.x, p.mean, -1});
    rows.push_back(dart::LongRow{"reward_stderr", p.x, p.stderr_, -1});
  }
  dart::write_long_csv(rows, dir / "curves.csv");
  manifest.outputs = {"curves.csv"};
  finish_manifest(manifest, dir);
  std::cout << "seeds: " << use_seeds << " budget: " << use_budget << "\n"
            << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_probe_curriculum(const CommonOpts& o, const std::string& pool_path,
                         const std::string& tracker_path, int episodes,
                         const std::string& mode_name) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("probe-curriculum", o);
  dart::RunManifest manifest = start_manifest("probe-curriculum", cfg, o);
  const dart::ModelPool pool = dart::ModelPool::load(pool_path);
  add_input(manifest, fs::path(pool_path) / "pool_index.json");
  dart::nn::PolicyNet tracker = load_net(tracker_path);
  add_input(manifest, tracker_path);

  dart::EvalContext ctx{cfg.to_train_context(), &pool,
                        o.workers > 0 ? o.workers : 1};
  const dart::ActMode mode = parse_mode(mode_name);
  const dart::CurriculumProbeResult result = dart::curriculum_probe(
      [&tracker, mode] {
        return std::make_unique<dart::TeacherController>(tracker, mode);
      },
      pool, ctx, episodes > 0 ? episodes : cfg.eval.probe_episodes, o.seed);

  dart::write_probe_csv(result, dir / "probe.csv");
  json summary;
  summary["spearman_fov_vs_index"] = result.spearman_fov_vs_index;
  summary["snapshots"] = result.snapshots.size();
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  manifest.outputs = {"probe.csv", "summary.json"};
  finish_manifest(manifest, dir);
  std::cout << "spearman(fov_frequency, snapshot): "
            << result.spearman_fov_vs_index << "\n"
            << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_ablation(const CommonOpts& o, const std::string& teacher_path,
                 const std::string& pool_path, const std::string& student_path,
                 const std::string& benches_arg) {
  const dart::FullConfig cfg = resolve_config(o);
  const fs::path dir = make_run_dir("ablation", o);
  dart::RunManifest manifest = start_manifest("ablation", cfg, o);
  const dart::nn::PolicyNet teacher = load_net(teacher_path);
  const dart::nn::PolicyNet student = load_net(student_path);
  const dart::ModelPool pool = dart::ModelPool::load(pool_path);
  add_input(manifest, teacher_path);
  add_input(manifest, student_path);
  add_input(manifest, fs::path(pool_path) / "pool_index.json");

  dart::EvalContext ctx{cfg.to_train_context(), &pool,
                        o.workers > 0 ? o.workers : 1};
  dart::AblationConfig acfg;
  acfg.distill = cfg.distill;
  acfg.rl = cfg.rl;
  acfg.seed = o.seed;
  std::stringstream ss(benches_arg);
  std::string token;
  while (std::getline(ss, token, ',')) {
    dart::BenchConfig b = dart::parse_bench(token);
    b.episodes = cfg.eval.episodes;
    b.seed = o.seed;
    acfg.benches.push_back(b);
  }
  if (acfg.benches.empty()) {
    throw dart::ConfigError("--benches must name at least one bench");
  }

  const std::vector<dart::AblationRow> rows =
      dart::ablation_suite(teacher, pool, student, ctx, acfg);
  dart::write_ablation_csv(rows, dir / "ablation.csv");
  manifest.outputs = {"ablation.csv"};
  finish_manifest(manifest, dir);
  for (const dart::AblationRow& r : rows) {
    std::cout << r.variant << " " << r.bench << ": AR=" << r.ar
              << " EL=" << r.el << " SR=" << r.sr << "\n";
  }
  std::cout << "run dir: " << dir.string() << "\n";
  return 0;
}

int cmd_replay(const std::string& trace_path) {
  std::ifstream is(trace_path);
  if (!is) {
    throw dart::MissingArtifactError("missing trace file " + trace_path);
  }
  std::string line;
  int episode = 0;
  bool fresh = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw dart::MissingArtifactError("corrupt trace line in " + trace_path);
    }
    if (fresh) {
      std::cout << "=== episode " << episode << "\n";
      fresh = false;
    }
    std::cout << "step " << rec.at("step").get<int>() << " |";
    const auto& poses = rec.at("poses");
    const auto& actions = rec.at("actions");
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const char* who = i == 0 ? "tracker" : (i == 1 ? "target" : "distractor");
      std::cout << " " << who << "(" << poses[i][0].get<double>() << ","
                << poses[i][1].get<double>() << ")@"
                << action_name(actions[i].get<int>());
    }
    std::cout << " | r1=" << rec.at("rewards")[0].get<double>()
              << " lost=" << rec.at("lost_steps").get<int>();
    bool any_collision = false;
    for (const auto& f : rec.at("collided")) {
      any_collision = any_collision || f.get<int>() != 0;
    }
    if (any_collision) std::cout << " [collision]";
    const std::string done = rec.at("done").get<std::string>();
    if (done != "running") {
      std::cout << " -> " << done << "\n";
      episode += 1;
      fresh = true;
    } else {
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dart: multi-agent active-tracking arena and learning toolkit"};
  app.require_subcommand(1);

  CommonOpts train_o, finetune_o, distill_o, eval_o, adv_o, probe_o, abl_o;
  std::string finetune_tracker, finetune_pool;
  std::string distill_teacher, distill_pool;
  std::string eval_controller = "random", eval_ckpt, eval_bench = "Nav-0";
  std::string eval_mode = "sample", eval_pool;
  int eval_episodes = 0;
  bool eval_traces = false;
  std::string adv_controller = "pid", adv_ckpt, adv_pool, adv_mode = "sample";
  std::int64_t adv_budget = -1;
  int adv_seeds = 0;
  std::string probe_pool, probe_tracker, probe_mode = "sample";
  int probe_episodes = 0;
  std::string abl_teacher, abl_pool, abl_student, abl_benches = "Nav-2,Meta-2";
  std::string replay_trace, rerun_manifest, rerun_out;

  CLI::App* c_train = app.add_subcommand("train-meta", "self-play meta training");
  add_common(c_train, train_o);

  CLI::App* c_fine = app.add_subcommand("finetune", "tracker fine-tuning vs the pool");
  add_common(c_fine, finetune_o);
  c_fine->add_option("--tracker", finetune_tracker, "tracker checkpoint")->required();
  c_fine->add_option("--pool", finetune_pool, "model pool directory")->required();

  CLI::App* c_dist = app.add_subcommand("distill", "teacher-student distillation");
  add_common(c_dist, distill_o);
  c_dist->add_option("--teacher", distill_teacher, "teacher checkpoint")->required();
  c_dist->add_option("--pool", distill_pool, "model pool directory");

  CLI::App* c_eval = app.add_subcommand("eval", "benchmark a tracker controller");
  add_common(c_eval, eval_o);
  c_eval->add_option("--controller", eval_controller,
                     "student|teacher|pid|random");
  c_eval->add_option("--ckpt", eval_ckpt, "checkpoint for student/teacher");
  c_eval->add_option("--bench", eval_bench, "Nav-x or Meta-x");
  c_eval->add_option("--episodes", eval_episodes, "episode count");
  c_eval->add_option("--mode", eval_mode, "sample|greedy acting");
  c_eval->add_option("--pool", eval_pool, "pool directory (Meta benches)");
  c_eval->add_flag("--traces", eval_traces, "write JSONL step traces");

  CLI::App* c_adv = app.add_subcommand("adv-test", "adversarial robustness test");
  add_common(c_adv, adv_o);
  c_adv->add_option("--controller", adv_controller, "frozen tracker kind");
  c_adv->add_option("--ckpt", adv_ckpt, "checkpoint for student/teacher");
  c_adv->add_option("--pool", adv_pool, "model pool directory")->required();
  c_adv->add_option("--budget", adv_budget, "adversary interaction budget");
  c_adv->add_option("--seeds", adv_seeds, "number of adversarial runs");
  c_adv->add_option("--mode", adv_mode, "sample|greedy acting");

  CLI::App* c_probe = app.add_subcommand("probe-curriculum",
                                         "replay pool snapshots and measure difficulty");
  add_common(c_probe, probe_o);
  c_probe->add_option("--pool", probe_pool, "model pool directory")->required();
  c_probe->add_option("--tracker", probe_tracker, "probe tracker checkpoint")->required();
  c_probe->add_option("--episodes", probe_episodes, "episodes per snapshot");
  c_probe->add_option("--mode", probe_mode, "sample|greedy acting");

  CLI::App* c_abl = app.add_subcommand("ablation", "ablation comparison table");
  add_common(c_abl, abl_o);
  c_abl->add_option("--teacher", abl_teacher, "teacher checkpoint")->required();
  c_abl->add_option("--pool", abl_pool, "model pool directory")->required();
  c_abl->add_option("--student", abl_student, "distilled student checkpoint")->required();
  c_abl->add_option("--benches", abl_benches, "comma-separated bench list");

  CLI::App* c_replay = app.add_subcommand("replay", "dump a JSONL trace");
  c_replay->add_option("--trace", replay_trace, "trace file")->required();

  CLI::App* c_rerun = app.add_subcommand("rerun", "re-run a command from its manifest");
  c_rerun->add_option("--manifest", rerun_manifest, "manifest.json path")->required();
  c_rerun->add_option("--out", rerun_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_train->parsed()) return cmd_train_meta(train_o);
    if (c_fine->parsed()) {
      return cmd_finetune(finetune_o, finetune_tracker, finetune_pool);
    }
    if (c_dist->parsed()) {
      return cmd_distill(distill_o, distill_teacher, distill_pool);
    }
    if (c_eval->parsed()) {
      return cmd_eval(eval_o, eval_controller, eval_ckpt, eval_bench,
                      eval_episodes, eval_mode, eval_pool, eval_traces);
    }
    if (c_adv->parsed()) {
      return cmd_adv_test(adv_o, adv_controller, adv_ckpt, adv_pool,
                          adv_budget, adv_seeds, adv_mode);
    }
    if (c_probe->parsed()) {
      return cmd_probe_curriculum(probe_o, probe_pool, probe_tracker,
                                  probe_episodes, probe_mode);
    }
    if (c_abl->parsed()) {
      return cmd_ablation(abl_o, abl_teacher, abl_pool, abl_student,
                          abl_benches);
    }
    if (c_replay->parsed()) return cmd_replay(replay_trace);
    if (c_rerun->parsed()) {
      const dart::RunManifest m = dart::load_manifest(rerun_manifest);
      // replay the stored config and seed; inputs stay where the manifest
      // recorded them
      CommonOpts o;
      o.seed = m.seed;
      o.out = rerun_out;
      const fs::path cfg_tmp =
          fs::temp_directory_path() /
          ("dart-rerun-" + std::to_string(m.seed) + ".json");
      std::ofstream(cfg_tmp) << m.config.dump() << "\n";
      o.config_path = cfg_tmp.string();
      auto first_input = [&](const std::string& needle) {
        for (const auto& [path, hash] : m.input_hashes) {
          if (path.find(needle) != std::string::npos) return path;
        }
        return std::string{};
      };
      if (m.command == "train-meta") return cmd_train_meta(o);
      if (m.command == "finetune") {
        const std::string pool = first_input("pool_index.json");
        return cmd_finetune(o, first_input(".ckpt"),
                            fs::path(pool).parent_path().string());
      }
      if (m.command == "distill") {
        const std::string pool = first_input("pool_index.json");
        return cmd_distill(o, first_input(".ckpt"),
                           pool.empty()
                               ? std::string{}
                               : fs::path(pool).parent_path().string());
      }
      throw dart::ConfigError("rerun supports train-meta, finetune, and "
                              "distill manifests; got '" + m.command + "'");
    }
  } catch (const dart::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dart::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const dart::MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
