#include "dart/train.hpp"

#include <atomic>
#include <barrier>
#include <cmath>
#include <memory>
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
using nn::StepNodes;
using nn::Vec;

std::vector<double> n_step_returns(const std::vector<double>& rewards,
                                   double bootstrap, double gamma) {
  std::vector<double> returns(rewards.size());
  double acc = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

LossBreakdown actor_critic_update(const PolicyNet& net, GradBuffer& grads,
                                  const RoleRollout& rollout,
                                  const RlConfig& cfg, double entropy_w) {
  const std::size_t T = rollout.size();
  Graph g;
  const NetRefs refs = nn::bind(net, &grads);
  int h = g.input(rollout.mem_start.h);
  int c = net.spec.cell == nn::CellKind::Lstm ? g.input(rollout.mem_start.c) : -1;

  std::vector<StepNodes> nodes;
  nodes.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    nodes.push_back(nn::net_step(g, net.spec, refs, rollout.entities[t],
                                 rollout.extras[t], h, c));
    h = nodes.back().h;
    c = nodes.back().c;
  }

  std::vector<double> values(T);
  for (std::size_t t = 0; t < T; ++t) values[t] = g.scalar(nodes[t].value);
  const std::vector<double> returns =
      n_step_returns(rollout.rewards, rollout.bootstrap, cfg.gamma);

  LossBreakdown out;
  int loss = -1;
  for (std::size_t t = 0; t < T; ++t) {
    const double advantage = returns[t] - values[t];
    const int lp = nodes[t].log_probs;
    const int policy_term = g.scale(g.pick(lp, rollout.actions[t]), -advantage);
    const int diff =
        g.sub(g.input(Vec::Constant(1, returns[t])), nodes[t].value);
    const int value_term = g.scale(g.mul(diff, diff), 0.5);
    const int entropy = g.scale(g.dot(g.exp(lp), lp), -1.0);
    const int entropy_term = g.scale(entropy, -entropy_w);
    const int term = g.add(g.add(policy_term, value_term), entropy_term);
    loss = loss < 0 ? term : g.add(loss, term);

    out.policy += g.scalar(policy_term);
    out.value += g.scalar(value_term);
    out.entropy += g.scalar(entropy);
  }
  out.total = g.scalar(loss);
  if (!std::isfinite(out.total)) {
    throw DivergenceError("non-finite actor-critic loss");
  }
  g.backward(loss);
  return out;
}

TrainContext default_train_context() {
  TrainContext ctx;
  ctx.tracker_spec.entity_dim = 5;
  ctx.tracker_spec.extra_dim = 0;
  ctx.adversary_spec.entity_dim = 5;
  ctx.adversary_spec.extra_dim = kNumActions;
  ctx.student_spec.entity_dim = 3 + ctx.detection.appearance_pool;
  ctx.student_spec.extra_dim = kNumActions;
  return ctx;
}

namespace {

enum class TrackerMode { LearnGrounded, LearnDetection, Frozen };
enum class OpponentMode { Learn, PoolSample, Navigator };

// Episode-local rng stream ids.
enum : std::uint64_t {
  kStreamAppearance = 1,
  kStreamDetection = 2,
  kStreamTrackerAct = 3,
  kStreamTargetAct = 4,
  kStreamDistractorAct = 5,  // + distractor index
  kStreamNavigator = 20,
  kStreamPoolSample = 50,
};

struct LoopOptions {
  TrackerMode tracker_mode = TrackerMode::LearnGrounded;
  OpponentMode opponent_mode = OpponentMode::Learn;
  bool save_snapshots = false;
  int forced_distractors = -2;  // -2: leave the arena config alone
  TrackerController* frozen = nullptr;
  const ModelPool* pool = nullptr;
  AdversarialRunResult* adversarial_out = nullptr;
};

struct Shared {
  PolicyNet* tracker = nullptr;
  PolicyNet* target = nullptr;
  PolicyNet* distractor = nullptr;
  bool update_tracker = false;
  bool update_opponents = false;

  nn::AdamState adam_tracker, adam_target, adam_distractor;
  RewardNormalizer norm_tracker, norm_target, norm_distractor;

  std::atomic<std::int64_t> interactions{0};
  std::atomic<std::int64_t> episode_counter{0};
  std::int64_t next_snapshot = 0;

  ModelPool* pool_out = nullptr;
  TrainingLog log;

  std::mutex update_mutex;
  std::mutex log_mutex;
  std::mutex norm_mutex;
};

// One recurrent network instance rolling through an episode.
struct Instance {
  const PolicyNet* net = nullptr;
  MemoryState mem;
  MemoryState window_mem;
  RoleRollout rollout;
  Rng act_rng{0};
  double reward_sum = 0.0;
  double entropy_sum = 0.0;

  void start(const PolicyNet& n, Rng rng) {
    net = &n;
    mem = n.initial_memory();
    window_mem = mem;
    rollout.clear();
    act_rng = rng;
    reward_sum = 0.0;
    entropy_sum = 0.0;
  }
};

struct ObsBundle {
  std::vector<Vec> tracker_entities;
  Vec tracker_extra;
  std::vector<std::vector<Vec>> opponent_entities;  // agent index 1..n-1
  std::vector<Vec> opponent_extras;
  GroundedObservation tracker_grounded;
  DetectionObservation tracker_detection;
};

double entropy_of(const std::array<double, kNumActions>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// Per-worker gradient deposit for the synchronous rounds.
struct RoundDeposit {
  GradBuffer tracker, target, distractor;
  bool has_tracker = false, has_target = false, has_distractor = false;
  std::vector<double> samples_tracker, samples_target, samples_distractor;
};

class Trainer {
 public:
  Trainer(const TrainContext& ctx, const RlConfig& cfg, const LoopOptions& opt,
          Shared& shared, std::uint64_t seed)
      : ctx_(ctx), cfg_(cfg), opt_(opt), shared_(shared), seed_(seed) {
    arena_cfg_ = ctx.arena;
    if (opt.forced_distractors >= 0) {
      arena_cfg_.n_distractors = opt.forced_distractors;
    }
  }

  void run() {
    const int workers = std::max(1, cfg_.workers);
    if (workers == 1) {
      WorkerState ws;
      ws.worker_id = 0;
      while (!budget_exhausted()) {
        begin_episode(ws);
        while (true) {
          const bool done = advance(ws);
          if (done || budget_exhausted()) break;
        }
      }
      return;
    }
    if (!cfg_.sync_workers) {
      std::vector<std::thread> threads;
      std::exception_ptr failure;
      std::mutex failure_mutex;
      threads.reserve(workers);
      for (int w = 0; w < workers; ++w) {
        threads.emplace_back([this, w, &failure, &failure_mutex] {
          try {
            WorkerState ws;
            ws.worker_id = w;
            while (!budget_exhausted()) {
              begin_episode(ws);
              while (true) {
                const bool done = advance(ws);
                if (done || budget_exhausted()) break;
              }
            }
          } catch (...) {
            std::scoped_lock lk(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      if (failure) std::rethrow_exception(failure);
      return;
    }
    run_sync(workers);
  }

 private:
  struct WorkerState {
    int worker_id = 0;
    std::int64_t local_episode = 0;
    WorldState world;
    AppearanceMap appearances;
    Rng det_rng{0};
    Rng nav_rng{0};
    Instance tracker;
    Instance target;
    std::vector<Instance> distractors;
    std::vector<NavigatorState> navs;
    const PoolSnapshot* snapshot = nullptr;
    Action last_tracker_action = Action::NoOp;
    ObsBundle obs;
    bool episode_open = false;
    std::uint64_t episode_seed = 0;
    int episode_steps = 0;
    int steps_since_flush = 0;
    LossBreakdown last_tracker_loss, last_target_loss, last_distractor_loss;
    // synchronous-round state
    bool sync_mode = false;
    bool flushed = false;
    double scale_tracker = 0.0, scale_target = 0.0, scale_distractor = 0.0;
  };

  bool budget_exhausted() const {
    return shared_.interactions.load(std::memory_order_relaxed) >=
           cfg_.total_steps;
  }

  std::uint64_t next_episode_seed(WorkerState& ws) {
    std::int64_t index;
    if (ws.sync_mode) {
      index = (static_cast<std::int64_t>(ws.worker_id) << 40) | ws.local_episode;
      ws.local_episode += 1;
    } else {
      index = shared_.episode_counter.fetch_add(1, std::memory_order_relaxed);
    }
    return splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(index)));
  }

  void begin_episode(WorkerState& ws) {
    ws.episode_seed = next_episode_seed(ws);
    ws.world = reset(arena_cfg_, ws.episode_seed);
    ws.det_rng = Rng::derive(ws.episode_seed, kStreamDetection);
    ws.last_tracker_action = Action::NoOp;
    ws.episode_steps = 0;
    ws.steps_since_flush = 0;

    if (opt_.tracker_mode != TrackerMode::LearnGrounded) {
      Rng arng = Rng::derive(ws.episode_seed, kStreamAppearance);
      ws.appearances = draw_appearances(ws.world, ctx_.detection, arng);
    }

    if (opt_.tracker_mode != TrackerMode::Frozen) {
      ws.tracker.start(*shared_.tracker,
                       Rng::derive(ws.episode_seed, kStreamTrackerAct));
    } else {
      opt_.frozen->begin_episode(ws.episode_seed);
      ws.tracker.act_rng = Rng::derive(ws.episode_seed, kStreamTrackerAct);
      ws.tracker.reward_sum = 0.0;
      ws.tracker.entropy_sum = 0.0;
    }

    const int nd = ws.world.n_distractors();
    ws.distractors.clear();
    ws.navs.clear();
    switch (opt_.opponent_mode) {
      case OpponentMode::Learn:
        ws.target.start(*shared_.target,
                        Rng::derive(ws.episode_seed, kStreamTargetAct));
        ws.distractors.resize(nd);
        for (int j = 0; j < nd; ++j) {
          ws.distractors[j].start(
              *shared_.distractor,
              Rng::derive(ws.episode_seed, kStreamDistractorAct + j));
        }
        break;
      case OpponentMode::PoolSample: {
        Rng prng = Rng::derive(ws.episode_seed, kStreamPoolSample);
        ws.snapshot = &opt_.pool->sample(prng);
        ws.target.start(ws.snapshot->target,
                        Rng::derive(ws.episode_seed, kStreamTargetAct));
        ws.distractors.resize(nd);
        for (int j = 0; j < nd; ++j) {
          ws.distractors[j].start(
              ws.snapshot->distractor,
              Rng::derive(ws.episode_seed, kStreamDistractorAct + j));
        }
        break;
      }
      case OpponentMode::Navigator:
        ws.navs.resize(1 + nd);
        ws.nav_rng = Rng::derive(ws.episode_seed, kStreamNavigator);
        break;
    }

    ws.obs = make_obs(ws);
    ws.episode_open = true;
  }

  ObsBundle make_obs(WorkerState& ws) {
    ObsBundle b;
    if (opt_.tracker_mode != TrackerMode::LearnDetection) {
      b.tracker_grounded = grounded_obs(ws.world, 0, ctx_.obs);
      b.tracker_entities = grounded_entities(b.tracker_grounded);
    }
    if (opt_.tracker_mode != TrackerMode::LearnGrounded) {
      b.tracker_detection =
          detection_obs(ws.world, arena_cfg_, ctx_.detection, ws.appearances,
                        ws.last_tracker_action, ws.det_rng);
      if (opt_.tracker_mode == TrackerMode::LearnDetection) {
        b.tracker_entities =
            detection_entities(b.tracker_detection, ctx_.obs.rho_max,
                               ctx_.detection.appearance_pool);
        b.tracker_extra = extra_from(b.tracker_detection.last_self_action);
      }
    }
    if (opt_.opponent_mode != OpponentMode::Navigator) {
      const int n = static_cast<int>(ws.world.agents.size());
      b.opponent_entities.resize(n - 1);
      b.opponent_extras.resize(n - 1);
      for (int i = 1; i < n; ++i) {
        const GroundedObservation o =
            grounded_obs(ws.world, i, ctx_.obs, ws.last_tracker_action);
        b.opponent_entities[i - 1] = grounded_entities(o);
        b.opponent_extras[i - 1] = extra_from(o.tracker_last_action);
      }
    }
    return b;
  }

  double normalize_reward(WorkerState& ws, RewardNormalizer& norm,
                          double frozen_scale, std::vector<double>& samples,
                          double r) {
    if (!cfg_.reward_norm) return r;
    if (!ws.sync_mode) {
      std::scoped_lock lk(shared_.norm_mutex);
      return norm.normalize(r);
    }
    // Synchronous rounds divide by the scale frozen at the round start and
    // merge the raw samples at the barrier, keeping runs reproducible.
    samples.push_back(r);
    return frozen_scale > 0.0 ? r / (frozen_scale + 1e-8) : r;
  }

  // Advances one environment step; returns true when the episode ended.
  bool advance(WorkerState& ws) {
    const int n = static_cast<int>(ws.world.agents.size());
    std::vector<Action> actions(n, Action::NoOp);

    switch (opt_.tracker_mode) {
      case TrackerMode::LearnGrounded:
      case TrackerMode::LearnDetection: {
        const ActResult ar =
            neural_act(*ws.tracker.net, ws.obs.tracker_entities,
                       ws.obs.tracker_extra, ws.tracker.mem, ActMode::Sample,
                       ws.tracker.act_rng);
        actions[0] = ar.action;
        ws.tracker.rollout.entities.push_back(ws.obs.tracker_entities);
        ws.tracker.rollout.extras.push_back(ws.obs.tracker_extra);
        ws.tracker.rollout.actions.push_back(static_cast<int>(ar.action));
        ws.tracker.mem = ar.net.memory;
        ws.tracker.entropy_sum += entropy_of(ar.net.probs);
        break;
      }
      case TrackerMode::Frozen:
        actions[0] =
            opt_.frozen->act(ws.world, ws.obs.tracker_grounded,
                             ws.obs.tracker_detection, ws.tracker.act_rng);
        break;
    }

    if (opt_.opponent_mode == OpponentMode::Navigator) {
      for (int i = 1; i < n; ++i) {
        actions[i] = navigator_act(ws.navs[i - 1], ws.world.agents[i].pose,
                                   ws.world, ctx_.nav, ws.nav_rng);
      }
    } else {
      const bool learning = opt_.opponent_mode == OpponentMode::Learn;
      {
        const ActResult ar =
            neural_act(*ws.target.net, ws.obs.opponent_entities[0],
                       ws.obs.opponent_extras[0], ws.target.mem,
                       ActMode::Sample, ws.target.act_rng);
        actions[1] = ar.action;
        ws.target.mem = ar.net.memory;
        if (learning) {
          ws.target.rollout.entities.push_back(ws.obs.opponent_entities[0]);
          ws.target.rollout.extras.push_back(ws.obs.opponent_extras[0]);
          ws.target.rollout.actions.push_back(static_cast<int>(ar.action));
          ws.target.entropy_sum += entropy_of(ar.net.probs);
        }
      }
      for (std::size_t j = 0; j < ws.distractors.size(); ++j) {
        Instance& inst = ws.distractors[j];
        const ActResult ar = neural_act(
            *inst.net, ws.obs.opponent_entities[1 + j],
            ws.obs.opponent_extras[1 + j], inst.mem, ActMode::Sample,
            inst.act_rng);
        actions[2 + j] = ar.action;
        inst.mem = ar.net.memory;
        if (learning) {
          inst.rollout.entities.push_back(ws.obs.opponent_entities[1 + j]);
          inst.rollout.extras.push_back(ws.obs.opponent_extras[1 + j]);
          inst.rollout.actions.push_back(static_cast<int>(ar.action));
          inst.entropy_sum += entropy_of(ar.net.probs);
        }
      }
    }

    const StepResult sr = step(ws.world, actions, arena_cfg_);
    const RewardVector rv = compute_rewards(ws.world, sr.collided, ctx_.reward);
    ws.last_tracker_action = actions[0];
    ws.episode_steps += 1;
    ws.steps_since_flush += 1;

    ws.tracker.reward_sum += rv.r1;
    if (opt_.tracker_mode != TrackerMode::Frozen) {
      ws.tracker.rollout.rewards.push_back(normalize_reward(
          ws, shared_.norm_tracker, ws.scale_tracker,
          deposit_.samples_tracker, rv.r1));
    }
    if (opt_.opponent_mode == OpponentMode::Learn) {
      ws.target.reward_sum += rv.r2;
      ws.target.rollout.rewards.push_back(normalize_reward(
          ws, shared_.norm_target, ws.scale_target, deposit_.samples_target,
          rv.r2));
      for (std::size_t j = 0; j < ws.distractors.size(); ++j) {
        ws.distractors[j].reward_sum += rv.r3[j];
        ws.distractors[j].rollout.rewards.push_back(normalize_reward(
            ws, shared_.norm_distractor, ws.scale_distractor,
            deposit_.samples_distractor, rv.r3[j]));
      }
    }

    const std::int64_t now =
        shared_.interactions.fetch_add(1, std::memory_order_relaxed) + 1;
    if (opt_.save_snapshots && now == shared_.next_snapshot) {
      std::scoped_lock lk(shared_.update_mutex);
      shared_.pool_out->save(now, *shared_.target, *shared_.distractor);
      shared_.next_snapshot += cfg_.snapshot_interval;
    }

    const bool done = sr.done != Termination::Running;
    const bool out_of_budget = !ws.sync_mode && now >= cfg_.total_steps;
    ObsBundle next;
    if (!done) next = make_obs(ws);

    if (done || out_of_budget || ws.steps_since_flush >= cfg_.n_step) {
      flush_updates(ws, next, done);
      ws.steps_since_flush = 0;
    }

    if (done) {
      finish_episode(ws, now);
      ws.episode_open = false;
      return true;
    }
    ws.obs = std::move(next);
    return false;
  }

  void compute_window_grads(WorkerState& ws, const ObsBundle& next, bool done,
                            GradBuffer& tracker_grads, bool& have_tracker,
                            GradBuffer& target_grads, bool& have_target,
                            GradBuffer& distractor_grads,
                            bool& have_distractor) {
    const bool learn_tracker =
        shared_.update_tracker && opt_.tracker_mode != TrackerMode::Frozen;
    if (learn_tracker && ws.tracker.rollout.size() > 0) {
      ws.tracker.rollout.mem_start = ws.tracker.window_mem;
      ws.tracker.rollout.bootstrap =
          done ? 0.0
               : nn::forward(*ws.tracker.net, next.tracker_entities,
                             next.tracker_extra, ws.tracker.mem)
                     .value;
      tracker_grads = GradBuffer(ws.tracker.net->params);
      ws.last_tracker_loss =
          actor_critic_update(*ws.tracker.net, tracker_grads,
                              ws.tracker.rollout, cfg_, cfg_.entropy_w_tracker);
      have_tracker = true;
    }
    if (shared_.update_opponents && opt_.opponent_mode == OpponentMode::Learn) {
      if (ws.target.rollout.size() > 0) {
        ws.target.rollout.mem_start = ws.target.window_mem;
        ws.target.rollout.bootstrap =
            done ? 0.0
                 : nn::forward(*ws.target.net, next.opponent_entities[0],
                               next.opponent_extras[0], ws.target.mem)
                       .value;
        target_grads = GradBuffer(ws.target.net->params);
        ws.last_target_loss = actor_critic_update(
            *ws.target.net, target_grads, ws.target.rollout, cfg_,
            cfg_.entropy_w_adversary);
        have_target = true;
      }
      LossBreakdown dloss;
      for (std::size_t j = 0; j < ws.distractors.size(); ++j) {
        Instance& inst = ws.distractors[j];
        if (inst.rollout.size() == 0) continue;
        inst.rollout.mem_start = inst.window_mem;
        inst.rollout.bootstrap =
            done ? 0.0
                 : nn::forward(*inst.net, next.opponent_entities[1 + j],
                               next.opponent_extras[1 + j], inst.mem)
                       .value;
        if (!have_distractor) distractor_grads = GradBuffer(inst.net->params);
        const LossBreakdown lb =
            actor_critic_update(*inst.net, distractor_grads, inst.rollout,
                                cfg_, cfg_.entropy_w_adversary);
        dloss.total += lb.total;
        dloss.policy += lb.policy;
        dloss.value += lb.value;
        dloss.entropy += lb.entropy;
        have_distractor = true;
      }
      if (have_distractor) ws.last_distractor_loss = dloss;
    }
  }

  void flush_updates(WorkerState& ws, const ObsBundle& next, bool done) {
    if (ws.sync_mode) {
      RoundDeposit& slot = deposit_;
      compute_window_grads(ws, next, done, slot.tracker, slot.has_tracker,
                           slot.target, slot.has_target, slot.distractor,
                           slot.has_distractor);
      if ((slot.has_tracker && !slot.tracker.all_finite()) ||
          (slot.has_target && !slot.target.all_finite()) ||
          (slot.has_distractor && !slot.distractor.all_finite())) {
        throw DivergenceError("non-finite gradients in synchronous round");
      }
      ws.flushed = true;
      barrier_->arrive_and_wait();
      // scales refreshed after the round's merge
      ws.scale_tracker = shared_.norm_tracker.scale();
      ws.scale_target = shared_.norm_target.scale();
      ws.scale_distractor = shared_.norm_distractor.scale();
    } else {
      GradBuffer tracker_grads, target_grads, distractor_grads;
      bool have_tracker = false, have_target = false, have_distractor = false;
      compute_window_grads(ws, next, done, tracker_grads, have_tracker,
                           target_grads, have_target, distractor_grads,
                           have_distractor);
      if (have_tracker && !tracker_grads.all_finite()) {
        throw DivergenceError("non-finite tracker gradients");
      }
      if (have_target && !target_grads.all_finite()) {
        throw DivergenceError("non-finite target gradients");
      }
      if (have_distractor && !distractor_grads.all_finite()) {
        throw DivergenceError("non-finite distractor gradients");
      }
      if (have_tracker || have_target || have_distractor) {
        std::scoped_lock lk(shared_.update_mutex);
        const nn::AdamOptions aopt{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.clip_norm};
        if (have_tracker) {
          shared_.adam_tracker.step(shared_.tracker->params, tracker_grads, aopt);
        }
        if (have_target) {
          shared_.adam_target.step(shared_.target->params, target_grads, aopt);
        }
        if (have_distractor) {
          shared_.adam_distractor.step(shared_.distractor->params,
                                       distractor_grads, aopt);
        }
      }
    }

    ws.tracker.rollout.clear();
    ws.tracker.window_mem = ws.tracker.mem;
    ws.target.rollout.clear();
    ws.target.window_mem = ws.target.mem;
    for (Instance& inst : ws.distractors) {
      inst.rollout.clear();
      inst.window_mem = inst.mem;
    }
  }

  void finish_episode(WorkerState& ws, std::int64_t now) {
    std::scoped_lock lk(shared_.log_mutex);
    const int len = ws.episode_steps;
    {
      EpisodeLogRow row;
      row.step = now;
      row.role = "tracker";
      row.episode_reward = ws.tracker.reward_sum;
      row.episode_length = len;
      row.entropy = len > 0 ? ws.tracker.entropy_sum / len : 0.0;
      row.loss = ws.last_tracker_loss;
      shared_.log.record(row);
    }
    if (opt_.adversarial_out != nullptr) {
      opt_.adversarial_out->tracker_episode_rewards.push_back(
          ws.tracker.reward_sum);
      opt_.adversarial_out->episode_end_interactions.push_back(now);
    }
    if (opt_.opponent_mode == OpponentMode::Learn) {
      EpisodeLogRow row;
      row.step = now;
      row.role = "target";
      row.episode_reward = ws.target.reward_sum;
      row.episode_length = len;
      row.entropy = len > 0 ? ws.target.entropy_sum / len : 0.0;
      row.loss = ws.last_target_loss;
      shared_.log.record(row);
      if (!ws.distractors.empty()) {
        double mean_r = 0.0, mean_h = 0.0;
        for (const Instance& inst : ws.distractors) {
          mean_r += inst.reward_sum;
          mean_h += inst.entropy_sum;
        }
        const double nd = static_cast<double>(ws.distractors.size());
        EpisodeLogRow drow;
        drow.step = now;
        drow.role = "distractor";
        drow.episode_reward = mean_r / nd;
        drow.episode_length = len;
        drow.entropy = len > 0 ? mean_h / (nd * len) : 0.0;
        drow.loss = ws.last_distractor_loss;
        shared_.log.record(drow);
      }
    }
  }

  void run_sync(int workers) {
    sync_deposits_.assign(workers, nullptr);
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto completion = [this, workers, &stop]() noexcept {
      const nn::AdamOptions aopt{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.clip_norm};
      auto reduce = [&](bool RoundDeposit::*flag, GradBuffer RoundDeposit::*buf,
                        PolicyNet* net, nn::AdamState& adam) {
        GradBuffer sum;
        int count = 0;
        for (int w = 0; w < workers; ++w) {
          RoundDeposit* d = sync_deposits_[w];
          if (d == nullptr || !(d->*flag)) continue;
          if (count == 0) {
            sum = d->*buf;
          } else {
            sum.add(d->*buf);
          }
          d->*flag = false;
          count += 1;
        }
        if (count > 0 && net != nullptr) {
          sum.scale(1.0 / count);
          adam.step(net->params, sum, aopt);
        }
      };
      reduce(&RoundDeposit::has_tracker, &RoundDeposit::tracker,
             shared_.tracker, shared_.adam_tracker);
      reduce(&RoundDeposit::has_target, &RoundDeposit::target, shared_.target,
             shared_.adam_target);
      reduce(&RoundDeposit::has_distractor, &RoundDeposit::distractor,
             shared_.distractor, shared_.adam_distractor);
      for (int w = 0; w < workers; ++w) {
        RoundDeposit* d = sync_deposits_[w];
        if (d == nullptr) continue;
        for (double r : d->samples_tracker) shared_.norm_tracker.normalize(r);
        for (double r : d->samples_target) shared_.norm_target.normalize(r);
        for (double r : d->samples_distractor) {
          shared_.norm_distractor.normalize(r);
        }
        d->samples_tracker.clear();
        d->samples_target.clear();
        d->samples_distractor.clear();
      }
      if (budget_exhausted()) stop.store(true);
    };

    barrier_ = std::make_unique<std::barrier<std::function<void()>>>(
        workers, completion);

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([this, w, &stop, &failure, &failure_mutex] {
        WorkerState ws;
        ws.worker_id = w;
        ws.sync_mode = true;
        sync_deposits_[w] = &deposit_;
        try {
          while (!stop.load()) {
            if (!ws.episode_open) begin_episode(ws);
            ws.flushed = false;
            while (!ws.flushed) {
              if (advance(ws)) break;
            }
            if (!ws.flushed) {
              // episode ended exactly at a flush-free boundary; keep rounds
              // aligned by arriving anyway
              barrier_->arrive_and_wait();
            }
          }
        } catch (...) {
          {
            std::scoped_lock lk(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
          stop.store(true);
        }
        barrier_->arrive_and_drop();
      });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  const TrainContext& ctx_;
  const RlConfig& cfg_;
  const LoopOptions& opt_;
  Shared& shared_;
  std::uint64_t seed_;
  ArenaConfig arena_cfg_;

  static thread_local RoundDeposit deposit_;
  std::vector<RoundDeposit*> sync_deposits_;
  std::unique_ptr<std::barrier<std::function<void()>>> barrier_;
};

thread_local RoundDeposit Trainer::deposit_;

}  // namespace

// ---------------------------------------------------------------------------

SelfplayResult selfplay_train(const TrainContext& ctx, const RlConfig& cfg,
                              std::uint64_t seed) {
  Rng r1 = Rng::derive(seed, 1000);
  Rng r2 = Rng::derive(seed, 1001);
  Rng r3 = Rng::derive(seed, 1002);
  SelfplayResult out{PolicyNet::make(ctx.tracker_spec, r1),
                     PolicyNet::make(ctx.adversary_spec, r2),
                     PolicyNet::make(ctx.adversary_spec, r3), ModelPool{},
                     TrainingLog{}};

  Shared shared;
  shared.tracker = &out.tracker;
  shared.target = &out.target;
  shared.distractor = &out.distractor;
  shared.update_tracker = true;
  shared.update_opponents = true;
  shared.adam_tracker = nn::AdamState(out.tracker.params);
  shared.adam_target = nn::AdamState(out.target.params);
  shared.adam_distractor = nn::AdamState(out.distractor.params);
  shared.pool_out = &out.pool;
  shared.next_snapshot = cfg.snapshot_interval;

  LoopOptions opt;
  opt.tracker_mode = TrackerMode::LearnGrounded;
  opt.opponent_mode = OpponentMode::Learn;
  opt.save_snapshots = cfg.snapshot_interval > 0;

  Trainer trainer(ctx, cfg, opt, shared, seed);
  trainer.run();
  out.log = std::move(shared.log);
  return out;
}

TrainingLog finetune_tracker(PolicyNet& tracker, const ModelPool& pool,
                             const TrainContext& ctx, const RlConfig& cfg,
                             std::uint64_t seed) {
  Shared shared;
  shared.tracker = &tracker;
  shared.update_tracker = true;
  shared.update_opponents = false;
  shared.adam_tracker = nn::AdamState(tracker.params);

  LoopOptions opt;
  opt.tracker_mode = TrackerMode::LearnGrounded;
  opt.opponent_mode = OpponentMode::PoolSample;
  opt.pool = &pool;

  Trainer trainer(ctx, cfg, opt, shared, seed);
  trainer.run();
  return std::move(shared.log);
}

TrainingLog rl_from_detections(PolicyNet& student, const ModelPool* pool,
                               const TrainContext& ctx, const RlConfig& cfg,
                               std::uint64_t seed) {
  Shared shared;
  shared.tracker = &student;
  shared.update_tracker = true;
  shared.update_opponents = false;
  shared.adam_tracker = nn::AdamState(student.params);

  LoopOptions opt;
  opt.tracker_mode = TrackerMode::LearnDetection;
  opt.opponent_mode =
      pool != nullptr ? OpponentMode::PoolSample : OpponentMode::Navigator;
  opt.pool = pool;

  Trainer trainer(ctx, cfg, opt, shared, seed);
  trainer.run();
  return std::move(shared.log);
}

AdversarialRunResult adversarial_train(TrackerController& tracker,
                                       PolicyNet target, PolicyNet distractor,
                                       int n_distractors,
                                       const TrainContext& ctx,
                                       const RlConfig& cfg,
                                       std::uint64_t seed) {
  AdversarialRunResult out;
  Shared shared;
  shared.target = &target;
  shared.distractor = &distractor;
  shared.update_tracker = false;
  shared.update_opponents = true;
  shared.adam_target = nn::AdamState(target.params);
  shared.adam_distractor = nn::AdamState(distractor.params);

  LoopOptions opt;
  opt.tracker_mode = TrackerMode::Frozen;
  opt.opponent_mode = OpponentMode::Learn;
  opt.frozen = &tracker;
  opt.forced_distractors = n_distractors;
  opt.adversarial_out = &out;

  Trainer trainer(ctx, cfg, opt, shared, seed);
  trainer.run();
  out.log = std::move(shared.log);
  return out;
}

}  // namespace dart
