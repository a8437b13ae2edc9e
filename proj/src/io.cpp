#include "dart/io.hpp"

#include <chrono>
#include <cstdio>
#include <deque>
#include <fstream>

#include "dart/errors.hpp"

namespace dart {

using nlohmann::json;

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream os(path);
  if (!os) throw MissingArtifactError("cannot write " + path.string());
  return os;
}

}  // namespace

void write_lines(const std::filesystem::path& path,
                 const std::vector<std::string>& lines) {
  std::ofstream os = open_out(path);
  for (const std::string& line : lines) os << line << "\n";
}

void write_training_csv(const TrainingLog& log,
                        const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "step,role,mean_episode_reward,episode_length,entropy,policy_loss,"
        "value_loss,entropy_loss\n";
  std::map<std::string, std::deque<double>> trailing;
  for (const EpisodeLogRow& row : log.rows) {
    auto& window = trailing[row.role];
    window.push_back(row.episode_reward);
    if (window.size() > 20) window.pop_front();
    double mean = 0.0;
    for (double v : window) mean += v;
    mean /= static_cast<double>(window.size());
    os << row.step << ',' << row.role << ',' << fmt_g(mean) << ','
       << row.episode_length << ',' << fmt_g(row.entropy) << ','
       << fmt_g(row.loss.policy) << ',' << fmt_g(row.loss.value) << ','
       << fmt_g(row.loss.entropy) << "\n";
  }
}

void write_distill_csv(const std::vector<DistillLogRow>& log,
                       const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "step,kl_loss,agreement_rate,buffer_fill\n";
  for (const DistillLogRow& row : log) {
    os << row.step << ',' << fmt_g(row.kl) << ',' << fmt_g(row.agreement)
       << ',' << row.buffer_fill << "\n";
  }
}

void write_bench_csv(const BenchResult& result,
                     const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "episode,ar,el,success\n";
  for (std::size_t e = 0; e < result.episodes.size(); ++e) {
    const EpisodeMetrics& m = result.episodes[e];
    os << e << ',' << fmt_g(m.ar) << ',' << m.el << ','
       << (m.success ? 1 : 0) << "\n";
  }
}

void write_bench_summary(const BenchResult& result, const BenchConfig& bench,
                         const std::string& controller,
                         const std::filesystem::path& path) {
  json j;
  j["bench"] = bench.name();
  j["controller"] = controller;
  j["episodes"] = bench.episodes;
  j["seed"] = bench.seed;
  j["ar_mean"] = result.ar_mean;
  j["el_mean"] = result.el_mean;
  j["sr"] = result.sr;
  std::ofstream os = open_out(path);
  os << j.dump(2) << "\n";
}

void write_long_csv(const std::vector<LongRow>& rows,
                    const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "series,x,y,seed\n";
  for (const LongRow& r : rows) {
    os << r.series << ',' << fmt_g(r.x) << ',' << fmt_g(r.y) << ',' << r.seed
       << "\n";
  }
}

void write_probe_csv(const CurriculumProbeResult& probe,
                     const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "snapshot_index,interactions,fov_frequency,sr,ar_mean\n";
  for (std::size_t s = 0; s < probe.snapshots.size(); ++s) {
    const SnapshotProbe& p = probe.snapshots[s];
    os << s << ',' << p.interactions << ',' << fmt_g(p.fov_frequency) << ','
       << fmt_g(p.sr) << ',' << fmt_g(p.ar_mean) << "\n";
  }
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "variant,bench,ar,el,sr\n";
  for (const AblationRow& r : rows) {
    os << r.variant << ',' << r.bench << ',' << fmt_g(r.ar) << ','
       << fmt_g(r.el) << ',' << fmt_g(r.sr) << "\n";
  }
}

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& run_dir) {
  json j;
  j["run_id"] = manifest.run_id;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seed"] = manifest.seed;
  j["input_hashes"] = manifest.input_hashes;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  j["outputs"] = manifest.outputs;
  std::filesystem::create_directories(run_dir);
  std::ofstream os(run_dir / "manifest.json");
  if (!os) {
    throw MissingArtifactError("cannot write manifest in " + run_dir.string());
  }
  os << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw MissingArtifactError("missing manifest " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error&) {
    throw MissingArtifactError("corrupt manifest " + file.string());
  }
  RunManifest m;
  m.run_id = j.value("run_id", "");
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("input_hashes")) {
    m.input_hashes =
        j.at("input_hashes").get<std::map<std::string, std::string>>();
  }
  m.started_utc = j.value("started_utc", "");
  m.finished_utc = j.value("finished_utc", "");
  if (j.contains("outputs")) {
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
  }
  return m;
}

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dart
