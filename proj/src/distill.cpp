#include "dart/distill.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "dart/errors.hpp"
#include "dart/nn/graph.hpp"

namespace dart {

using nn::GradBuffer;
using nn::Graph;
using nn::MemoryState;
using nn::NetRefs;
using nn::PolicyNet;
using nn::Vec;

namespace {

enum : std::uint64_t {
  kStreamAppearance = 1,
  kStreamDetection = 2,
  kStreamStudentAct = 3,
  kStreamTargetAct = 4,
  kStreamDistractorAct = 5,
  kStreamPoolSample = 50,
};

int argmax7(const std::array<double, kNumActions>& v) {
  int best = 0;
  for (int i = 1; i < kNumActions; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

SampledEpisode sample_episode(const PolicyNet& student, const PolicyNet& teacher,
                              const ModelPool* pool, const TrainContext& ctx,
                              const DistillConfig& cfg, std::uint64_t seed) {
  ArenaConfig arena = ctx.arena;
  arena.n_distractors = cfg.n_distractors;
  WorldState world = reset(arena, seed);
  Rng arng = Rng::derive(seed, kStreamAppearance);
  const AppearanceMap appearances =
      draw_appearances(world, ctx.detection, arng);
  Rng det_rng = Rng::derive(seed, kStreamDetection);
  Rng student_rng = Rng::derive(seed, kStreamStudentAct);
  Rng target_rng = Rng::derive(seed, kStreamTargetAct);
  Rng pool_rng = Rng::derive(seed, kStreamPoolSample);

  bool scripted = cfg.scripted_opponents;
  if (!scripted && cfg.scripted_mix > 0.0) {
    scripted = pool_rng.uniform() < cfg.scripted_mix;
  }
  const PoolSnapshot* snapshot = nullptr;
  if (!scripted) {
    if (pool == nullptr) {
      throw MissingArtifactError("distillation without a model pool");
    }
    snapshot = &pool->sample(pool_rng);
  }

  SampledEpisode out;
  out.snapshot_interactions = scripted ? -1 : snapshot->interaction_count;

  MemoryState student_mem = student.initial_memory();
  MemoryState teacher_mem = teacher.initial_memory();
  MemoryState target_mem;
  const int nd = world.n_distractors();
  std::vector<MemoryState> distractor_mems(nd);
  std::vector<Rng> distractor_rngs;
  std::vector<NavigatorState> navs(1 + nd);
  Rng nav_rng = Rng::derive(seed, kStreamTargetAct + 100);
  if (!scripted) {
    target_mem = snapshot->target.initial_memory();
    for (int j = 0; j < nd; ++j) {
      distractor_mems[j] = snapshot->distractor.initial_memory();
    }
  }
  for (int j = 0; j < nd; ++j) {
    distractor_rngs.push_back(Rng::derive(seed, kStreamDistractorAct + j));
  }

  Action last_tracker_action = Action::NoOp;
  int agree = 0;

  for (;;) {
    const DetectionObservation dobs =
        detection_obs(world, arena, ctx.detection, appearances,
                      last_tracker_action, det_rng);
    const std::vector<Vec> student_entities = detection_entities(
        dobs, ctx.obs.rho_max, ctx.detection.appearance_pool);
    const Vec student_extra = extra_from(dobs.last_self_action);
    const ActResult student_act =
        neural_act(student, student_entities, student_extra, student_mem,
                   ActMode::Sample, student_rng);
    student_mem = student_act.net.memory;

    const GroundedObservation gobs = grounded_obs(world, 0, ctx.obs);
    const nn::ForwardResult teacher_out = nn::forward(
        teacher, grounded_entities(gobs), Vec(), teacher_mem);
    teacher_mem = teacher_out.memory;

    SupervisedStep stored;
    stored.obs = dobs;
    if (cfg.onehot_teacher) {
      stored.teacher_dist.fill(0.0);
      stored.teacher_dist[argmax7(teacher_out.probs)] = 1.0;
    } else {
      stored.teacher_dist = teacher_out.probs;
    }
    out.steps.push_back(std::move(stored));
    agree +=
        argmax7(student_act.net.probs) == argmax7(teacher_out.probs) ? 1 : 0;

    const int n = static_cast<int>(world.agents.size());
    std::vector<Action> actions(n, Action::NoOp);
    actions[0] = student_act.action;
    if (scripted) {
      for (int i = 1; i < n; ++i) {
        actions[i] = navigator_act(navs[i - 1], world.agents[i].pose, world,
                                   ctx.nav, nav_rng);
      }
    } else {
      const GroundedObservation o =
          grounded_obs(world, 1, ctx.obs, last_tracker_action);
      const ActResult ar =
          neural_act(snapshot->target, grounded_entities(o),
                     extra_from(o.tracker_last_action), target_mem,
                     ActMode::Sample, target_rng);
      actions[1] = ar.action;
      target_mem = ar.net.memory;
      for (int j = 0; j < nd; ++j) {
        const GroundedObservation oj =
            grounded_obs(world, 2 + j, ctx.obs, last_tracker_action);
        const ActResult arj =
            neural_act(snapshot->distractor, grounded_entities(oj),
                       extra_from(oj.tracker_last_action), distractor_mems[j],
                       ActMode::Sample, distractor_rngs[j]);
        actions[2 + j] = arj.action;
        distractor_mems[j] = arj.net.memory;
      }
    }

    const StepResult sr = step(world, actions, arena);
    last_tracker_action = student_act.action;
    if (sr.done != Termination::Running) break;
  }

  out.length = static_cast<int>(out.steps.size());
  out.agreement =
      out.length > 0 ? static_cast<double>(agree) / out.length : 0.0;
  return out;
}

double kl_loss_update(const PolicyNet& student, GradBuffer& grads,
                      const std::vector<KlWindow>& batch,
                      const TrainContext& ctx) {
  Graph g;
  const NetRefs refs = nn::bind(student, &grads);
  double kl_value_sum = 0.0;
  std::int64_t steps = 0;
  int loss = -1;

  for (const KlWindow& w : batch) {
    const SupervisedEpisode& ep = *w.episode;
    // no-grad prefix to rebuild the memory at the window start
    MemoryState mem = student.initial_memory();
    for (int t = 0; t < w.offset; ++t) {
      const std::vector<Vec> ents = detection_entities(
          ep[t].obs, ctx.obs.rho_max, ctx.detection.appearance_pool);
      mem = nn::forward(student, ents, extra_from(ep[t].obs.last_self_action),
                        mem)
                .memory;
    }
    int h = g.input(mem.h);
    int c = student.spec.cell == nn::CellKind::Lstm ? g.input(mem.c) : -1;
    for (int t = w.offset; t < w.offset + w.length; ++t) {
      const std::vector<Vec> ents = detection_entities(
          ep[t].obs, ctx.obs.rho_max, ctx.detection.appearance_pool);
      const nn::StepNodes sn =
          nn::net_step(g, student.spec, refs, ents,
                       extra_from(ep[t].obs.last_self_action), h, c);
      h = sn.h;
      c = sn.c;
      Vec p(kNumActions);
      double plogp = 0.0;
      for (int a = 0; a < kNumActions; ++a) {
        p[a] = ep[t].teacher_dist[a];
        if (p[a] > 0.0) plogp += p[a] * std::log(p[a]);  // 0 log 0 = 0
      }
      const int cross = g.scale(g.dot(g.input(std::move(p)), sn.log_probs), -1.0);
      loss = loss < 0 ? cross : g.add(loss, cross);
      kl_value_sum += plogp + g.scalar(cross);
      steps += 1;
    }
  }
  if (loss < 0) return 0.0;
  if (!std::isfinite(g.scalar(loss))) {
    throw DivergenceError("non-finite distillation loss");
  }
  g.backward(loss);
  return steps > 0 ? kl_value_sum / static_cast<double>(steps) : 0.0;
}

namespace {

KlWindow draw_window(const SequenceBuffer& buffer, int window, Rng& rng) {
  const SupervisedEpisode& ep = buffer.sample(rng);
  const int len = static_cast<int>(ep.size());
  const int span = std::min(window, len);
  const int max_offset = len - span;
  const int offset = max_offset > 0 ? rng.uniform_int(max_offset + 1) : 0;
  return KlWindow{&ep, offset, span};
}

}  // namespace

DistillResult distill_train(const PolicyNet& teacher, const ModelPool* pool,
                            const TrainContext& ctx, const DistillConfig& cfg,
                            std::uint64_t seed) {
  Rng init_rng = Rng::derive(seed, 2000);
  DistillResult out{PolicyNet::make(ctx.student_spec, init_rng), {}};
  nn::AdamState adam(out.student.params);
  const nn::AdamOptions aopt{cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm};

  if (cfg.samplers <= 1) {
    // Synchronous alternation: one episode in, a fixed number of updates.
    SequenceBuffer buffer(cfg.buffer_capacity);
    Rng learner_rng = Rng::derive(seed, 9999);
    std::int64_t interactions = 0;
    std::int64_t episode_index = 0;
    while (interactions < cfg.total_steps) {
      const std::uint64_t ep_seed =
          splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(episode_index)));
      SampledEpisode ep =
          sample_episode(out.student, teacher, pool, ctx, cfg, ep_seed);
      interactions += ep.length;
      buffer.push(std::move(ep.steps));
      double kl = 0.0;
      for (int u = 0; u < cfg.updates_per_episode; ++u) {
        std::vector<KlWindow> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
          batch.push_back(draw_window(buffer, cfg.window, learner_rng));
        }
        GradBuffer grads(out.student.params);
        kl = kl_loss_update(out.student, grads, batch, ctx);
        if (!grads.all_finite()) {
          throw DivergenceError("non-finite distillation gradients");
        }
        adam.step(out.student.params, grads, aopt);
      }
      out.log.push_back(DistillLogRow{interactions, kl, ep.agreement,
                                      static_cast<std::int64_t>(buffer.size())});
      episode_index += 1;
    }
    return out;
  }

  // Asynchronous samplers + one learner. Sampler rollouts read the student
  // parameters while the learner updates them; by contract this mode is not
  // bit-reproducible.
  SequenceBuffer buffer(cfg.buffer_capacity);
  std::mutex buffer_mutex;
  std::condition_variable buffer_cv;
  std::atomic<std::int64_t> interactions{0};
  std::atomic<std::int64_t> episode_counter{0};
  std::atomic<bool> sampling_done{false};
  std::atomic<double> last_agreement{0.0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  std::mutex failure_mutex;

  std::vector<std::thread> samplers;
  samplers.reserve(cfg.samplers);
  for (int s = 0; s < cfg.samplers; ++s) {
    samplers.emplace_back([&] {
      try {
        while (interactions.load() < cfg.total_steps) {
          const std::int64_t idx = episode_counter.fetch_add(1);
          const std::uint64_t ep_seed =
              splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(idx)));
          SampledEpisode ep =
              sample_episode(out.student, teacher, pool, ctx, cfg, ep_seed);
          const std::int64_t now = interactions.fetch_add(ep.length) + ep.length;
          last_agreement.store(ep.agreement);
          {
            std::scoped_lock lk(buffer_mutex);
            buffer.push(std::move(ep.steps));
          }
          buffer_cv.notify_all();
          {
            std::scoped_lock lk(log_mutex);
            out.log.push_back(DistillLogRow{now, 0.0, ep.agreement, 0});
          }
        }
      } catch (...) {
        std::scoped_lock lk(failure_mutex);
        if (!failure) failure = std::current_exception();
        sampling_done.store(true);
        buffer_cv.notify_all();
      }
    });
  }

  std::thread learner([&] {
    try {
      Rng learner_rng = Rng::derive(seed, 9999);
      while (!sampling_done.load()) {
        std::vector<KlWindow> batch;
        {
          std::unique_lock lk(buffer_mutex);
          buffer_cv.wait(lk, [&] {
            return buffer.size() > 0 || sampling_done.load();
          });
          if (buffer.size() == 0) break;
          batch.reserve(cfg.batch_size);
          for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(draw_window(buffer, cfg.window, learner_rng));
          }
          // Windows reference buffer episodes; run the update while holding
          // the lock so eviction cannot invalidate them mid-batch.
          GradBuffer grads(out.student.params);
          const double kl = kl_loss_update(out.student, grads, batch, ctx);
          if (!grads.all_finite()) {
            throw DivergenceError("non-finite distillation gradients");
          }
          adam.step(out.student.params, grads, aopt);
          std::scoped_lock lg(log_mutex);
          out.log.push_back(DistillLogRow{
              interactions.load(), kl, last_agreement.load(),
              static_cast<std::int64_t>(buffer.size())});
        }
        if (interactions.load() >= cfg.total_steps) break;
      }
    } catch (...) {
      std::scoped_lock lk(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });

  for (auto& t : samplers) t.join();
  sampling_done.store(true);
  buffer_cv.notify_all();
  learner.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace dart
