#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "dart/distill.hpp"
#include "dart/eval.hpp"
#include "dart/train.hpp"

namespace dart {

// Deterministic shortest-round-trip formatting for CSV payloads.
std::string fmt_g(double v);

void write_lines(const std::filesystem::path& path,
                 const std::vector<std::string>& lines);

// step,role,mean_episode_reward,episode_length,entropy,policy_loss,
// value_loss,entropy_loss -- the reward column is a trailing mean over the
// role's last 20 episodes.
void write_training_csv(const TrainingLog& log,
                        const std::filesystem::path& path);

// step,kl_loss,agreement_rate,buffer_fill
void write_distill_csv(const std::vector<DistillLogRow>& log,
                       const std::filesystem::path& path);

// episode,ar,el,success
void write_bench_csv(const BenchResult& result,
                     const std::filesystem::path& path);

void write_bench_summary(const BenchResult& result, const BenchConfig& bench,
                         const std::string& controller,
                         const std::filesystem::path& path);

// series,x,y,seed (plot-ready long format)
struct LongRow {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  std::int64_t seed = 0;
};
void write_long_csv(const std::vector<LongRow>& rows,
                    const std::filesystem::path& path);

// snapshot_index,interactions,fov_frequency,sr,ar_mean
void write_probe_csv(const CurriculumProbeResult& probe,
                     const std::filesystem::path& path);

// variant,bench,ar,el,sr
void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);

struct RunManifest {
  std::string run_id;
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;  // artifact path -> hash
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> outputs;  // paths relative to the run directory
};

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& run_dir);
RunManifest load_manifest(const std::filesystem::path& file);

std::string utc_now_iso();

}  // namespace dart
