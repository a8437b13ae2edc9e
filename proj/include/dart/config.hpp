#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "dart/distill.hpp"
#include "dart/policy.hpp"
#include "dart/train.hpp"

namespace dart {

struct EvalRunConfig {
  int episodes = 100;
  int probe_episodes = 30;
  std::int64_t adv_budget = 20000;
  int adv_seeds = 3;
  int adv_distractors = 2;
};

struct NetConfig {
  std::string encoder = "bigru";
  int encoder_hidden = 64;
  std::string cell = "lstm";
  int cell_hidden = 128;
};

// Whole-artifact configuration; every field round-trips through JSON and
// unknown keys are rejected with their path.
struct FullConfig {
  ArenaConfig arena;
  RewardParams reward;
  ObsParams obs;
  DetectionConfig detection;
  NavigatorConfig nav;
  PidParams pid;
  RlConfig rl;        // self-play stage
  RlConfig finetune;  // tracker-only stage (lr 5e-4)
  DistillConfig distill;
  EvalRunConfig eval;
  NetConfig tracker_net, adversary_net, student_net;

  TrainContext to_train_context() const;
};

FullConfig default_config();           // desk scale
void apply_paper_scale(FullConfig& c); // 2M-interaction budgets

nlohmann::json config_to_json(const FullConfig& c);
FullConfig config_from_json(const nlohmann::json& j);

// Reads a JSON config file. An optional top-level "preset" of "desk" or
// "paper" selects the base the file's keys override.
FullConfig load_config_file(const std::filesystem::path& path);

// Applies dotted-path overrides like "arena.dt=0.05" onto a config.
FullConfig apply_overrides(const FullConfig& base,
                           const std::vector<std::string>& overrides);

}  // namespace dart
