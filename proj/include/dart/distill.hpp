#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "dart/nn/net.hpp"
#include "dart/obs.hpp"
#include "dart/policy.hpp"
#include "dart/train.hpp"

namespace dart {

struct DistillConfig {
  std::int64_t total_steps = 150000;  // sampled interactions; paper runs 2M
  int buffer_capacity = 500;          // episodes
  int batch_size = 8;
  int window = 20;  // forward-step truncation (published table says 30)
  double lr = 3e-4;  // desk-scale rate; the paper-scale preset restores 1e-4
  int samplers = 1;
  int updates_per_episode = 16;  // learner cadence in synchronous mode
  bool onehot_teacher = false;  // store argmax only; KL degenerates to NLL
  double clip_norm = 10.0;
  int n_distractors = 2;  // fixed while learning the visual policy
  bool scripted_opponents = false;  // navigators instead of pool snapshots
  double scripted_mix = 0.0;  // fraction of episodes driven by navigators
};

struct SupervisedStep {
  DetectionObservation obs;
  std::array<double, kNumActions> teacher_dist;
};
using SupervisedEpisode = std::vector<SupervisedStep>;

// Whole-episode FIFO. Eviction drops the oldest episode; partial episodes
// never enter.
class SequenceBuffer {
 public:
  explicit SequenceBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(SupervisedEpisode ep) {
    episodes_.push_back(std::move(ep));
    while (episodes_.size() > capacity_) episodes_.pop_front();
  }
  const SupervisedEpisode& sample(Rng& rng) const {
    return episodes_[rng.uniform_int(static_cast<int>(episodes_.size()))];
  }
  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::deque<SupervisedEpisode> episodes_;
  std::size_t capacity_;
};

struct SampledEpisode {
  SupervisedEpisode steps;
  double agreement = 0.0;  // argmax(student) == argmax(teacher) frequency
  int length = 0;
  std::int64_t snapshot_interactions = 0;  // -1 when opponents are scripted
};

// One episode under STUDENT control: opponents come from a pool snapshot
// (or scripted navigators per cfg), the teacher's full distribution on the
// grounded state is recorded at every visited step (on-policy supervision).
SampledEpisode sample_episode(const nn::PolicyNet& student,
                              const nn::PolicyNet& teacher,
                              const ModelPool* pool, const TrainContext& ctx,
                              const DistillConfig& cfg, std::uint64_t seed);

struct KlWindow {
  const SupervisedEpisode* episode = nullptr;
  int offset = 0;
  int length = 0;
};

// KL(teacher || student) summed over the batch windows; gradients of the sum
// accumulate into `grads`, the return value is the per-step mean for
// reporting. Student memory is rebuilt from the sequence start so truncated
// windows match full unrolling.
double kl_loss_update(const nn::PolicyNet& student, nn::GradBuffer& grads,
                      const std::vector<KlWindow>& batch,
                      const TrainContext& ctx);

struct DistillLogRow {
  std::int64_t step = 0;
  double kl = 0.0;
  double agreement = 0.0;
  std::int64_t buffer_fill = 0;
};

struct DistillResult {
  nn::PolicyNet student;
  std::vector<DistillLogRow> log;
};

DistillResult distill_train(const nn::PolicyNet& teacher, const ModelPool* pool,
                            const TrainContext& ctx, const DistillConfig& cfg,
                            std::uint64_t seed);

}  // namespace dart
