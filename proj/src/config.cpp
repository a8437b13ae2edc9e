#include "dart/config.hpp"

#include <fstream>
#include <set>

#include "dart/errors.hpp"

namespace dart {

using nlohmann::json;

namespace {

class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError("config section '" + path_ + "' must be an object");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for config key '" + path_ + "." + key + "'");
    }
  }

  const json* child(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key: '" + path_ + "." + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_arena(const json& j, ArenaConfig& a) {
  StrictObject o(j, "arena");
  o.get("dt", a.dt);
  o.get("v_max_lin", a.v_max_lin);
  o.get("v_max_ang", a.v_max_ang);
  o.get("alpha", a.alpha);
  o.get("arena_w", a.arena_w);
  o.get("arena_h", a.arena_h);
  o.get("fov_half_angle", a.fov_half_angle);
  o.get("fov_range", a.fov_range);
  o.get("agent_radius", a.agent_radius);
  o.get("max_episode_steps", a.max_episode_steps);
  o.get("lost_limit_steps", a.lost_limit_steps);
  if (const json* nd = o.child("n_distractors")) {
    if (nd->is_string()) {
      if (nd->get<std::string>() != "random") {
        throw ConfigError("arena.n_distractors must be 0..4 or \"random\"");
      }
      a.n_distractors = kRandomDistractors;
    } else {
      a.n_distractors = nd->get<int>();
      if (a.n_distractors < 0 || a.n_distractors > 4) {
        throw ConfigError("arena.n_distractors must be 0..4 or \"random\"");
      }
    }
  }
  o.finish();
  if (a.dt <= 0.0) throw ConfigError("arena.dt must be positive");
  if (a.max_episode_steps < 1) {
    throw ConfigError("arena.max_episode_steps must be >= 1");
  }
  if (a.alpha < 0.0 || a.alpha >= 1.0) {
    throw ConfigError("arena.alpha must lie in [0, 1)");
  }
}

void parse_reward(const json& j, RewardParams& r) {
  StrictObject o(j, "reward");
  o.get("rho_star", r.rho_star);
  o.get("theta_star", r.theta_star);
  o.get("rho_max", r.rho_max);
  o.get("theta_max", r.theta_max);
  o.get("collision_penalty", r.collision_penalty);
  o.finish();
  if (r.rho_max <= 0.0) throw ConfigError("reward.rho_max must be positive");
  if (r.theta_max <= 0.0) throw ConfigError("reward.theta_max must be positive");
}

void parse_obs(const json& j, ObsParams& p) {
  StrictObject o(j, "obs");
  o.get("rho_max", p.rho_max);
  o.finish();
  if (p.rho_max <= 0.0) throw ConfigError("obs.rho_max must be positive");
}

void parse_detection(const json& j, DetectionConfig& d) {
  StrictObject o(j, "detection");
  o.get("noise_std_rho", d.noise_std_rho);
  o.get("noise_std_theta", d.noise_std_theta);
  o.get("appearance_pool", d.appearance_pool);
  o.get("unique_appearances", d.unique_appearances);
  o.finish();
  if (d.appearance_pool < 1) {
    throw ConfigError("detection.appearance_pool must be >= 1");
  }
}

void parse_nav(const json& j, NavigatorConfig& n) {
  StrictObject o(j, "nav");
  o.get("waypoint_radius", n.waypoint_radius);
  o.get("resample_steps", n.resample_steps);
  o.get("speed_min", n.speed_min);
  o.get("speed_max", n.speed_max);
  o.get("bearing_turn", n.bearing_turn);
  o.get("bearing_fwd_turn", n.bearing_fwd_turn);
  o.finish();
}

void parse_pid(const json& j, PidParams& p) {
  StrictObject o(j, "pid");
  o.get("p_lin", p.p_lin);
  o.get("p_ang", p.p_ang);
  o.get("deadband_rho", p.deadband_rho);
  o.get("deadband_theta", p.deadband_theta);
  o.finish();
  if (p.p_lin <= 0.0 || p.p_ang <= 0.0) {
    throw ConfigError("pid gains must be positive");
  }
}

void parse_rl(const json& j, const char* section, RlConfig& r) {
  StrictObject o(j, section);
  o.get("total_steps", r.total_steps);
  o.get("n_step", r.n_step);
  o.get("gamma", r.gamma);
  o.get("entropy_w_tracker", r.entropy_w_tracker);
  o.get("entropy_w_adversary", r.entropy_w_adversary);
  o.get("lr", r.lr);
  o.get("workers", r.workers);
  o.get("reward_norm", r.reward_norm);
  o.get("snapshot_interval", r.snapshot_interval);
  o.get("clip_norm", r.clip_norm);
  o.get("sync_workers", r.sync_workers);
  o.finish();
  if (r.gamma <= 0.0 || r.gamma >= 1.0) {
    throw ConfigError(std::string(section) + ".gamma must lie in (0, 1)");
  }
  if (r.n_step < 1) throw ConfigError(std::string(section) + ".n_step must be >= 1");
}

void parse_distill(const json& j, DistillConfig& d) {
  StrictObject o(j, "distill");
  o.get("total_steps", d.total_steps);
  o.get("buffer_capacity", d.buffer_capacity);
  o.get("batch_size", d.batch_size);
  o.get("window", d.window);
  o.get("lr", d.lr);
  o.get("samplers", d.samplers);
  o.get("updates_per_episode", d.updates_per_episode);
  o.get("onehot_teacher", d.onehot_teacher);
  o.get("clip_norm", d.clip_norm);
  o.get("n_distractors", d.n_distractors);
  o.get("scripted_opponents", d.scripted_opponents);
  o.get("scripted_mix", d.scripted_mix);
  o.finish();
  if (d.scripted_mix < 0.0 || d.scripted_mix > 1.0) {
    throw ConfigError("distill.scripted_mix must lie in [0, 1]");
  }
  if (d.buffer_capacity < 1) {
    throw ConfigError("distill.buffer_capacity must be >= 1");
  }
}

void parse_eval(const json& j, EvalRunConfig& e) {
  StrictObject o(j, "eval");
  o.get("episodes", e.episodes);
  o.get("probe_episodes", e.probe_episodes);
  o.get("adv_budget", e.adv_budget);
  o.get("adv_seeds", e.adv_seeds);
  o.get("adv_distractors", e.adv_distractors);
  o.finish();
  if (e.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
}

void parse_net(const json& j, const char* section, NetConfig& n) {
  StrictObject o(j, section);
  o.get("encoder", n.encoder);
  o.get("encoder_hidden", n.encoder_hidden);
  o.get("cell", n.cell);
  o.get("cell_hidden", n.cell_hidden);
  o.finish();
  nn::encoder_kind_from_string(n.encoder);
  nn::cell_kind_from_string(n.cell);
  if (n.encoder_hidden < 1 || n.cell_hidden < 1) {
    throw ConfigError(std::string(section) + " hidden sizes must be >= 1");
  }
}

nn::NetSpec make_spec(const NetConfig& n, int entity_dim, int extra_dim) {
  nn::NetSpec s;
  s.encoder = nn::encoder_kind_from_string(n.encoder);
  s.encoder_hidden = n.encoder_hidden;
  s.cell = nn::cell_kind_from_string(n.cell);
  s.cell_hidden = n.cell_hidden;
  s.entity_dim = entity_dim;
  s.extra_dim = extra_dim;
  return s;
}

json net_to_json(const NetConfig& n) {
  return json{{"encoder", n.encoder},
              {"encoder_hidden", n.encoder_hidden},
              {"cell", n.cell},
              {"cell_hidden", n.cell_hidden}};
}

}  // namespace

TrainContext FullConfig::to_train_context() const {
  TrainContext ctx;
  ctx.arena = arena;
  ctx.reward = reward;
  ctx.obs = obs;
  ctx.nav = nav;
  ctx.detection = detection;
  ctx.tracker_spec = make_spec(tracker_net, 5, 0);
  ctx.adversary_spec = make_spec(adversary_net, 5, kNumActions);
  ctx.student_spec =
      make_spec(student_net, 3 + detection.appearance_pool, kNumActions);
  return ctx;
}

FullConfig default_config() {
  FullConfig c;
  c.finetune.lr = 5e-4;
  c.finetune.total_steps = 50000;
  c.finetune.snapshot_interval = 0;
  return c;
}

void apply_paper_scale(FullConfig& c) {
  c.rl.total_steps = 2000000;
  c.rl.snapshot_interval = 50000;
  c.rl.workers = 4;
  c.finetune.total_steps = 500000;
  c.finetune.lr = 5e-4;
  c.finetune.workers = 4;
  c.distill.total_steps = 2000000;
  c.distill.samplers = 4;
  c.distill.lr = 1e-4;
  c.eval.adv_budget = 100000;
}

json config_to_json(const FullConfig& c) {
  json j;
  j["arena"] = {
      {"dt", c.arena.dt},
      {"v_max_lin", c.arena.v_max_lin},
      {"v_max_ang", c.arena.v_max_ang},
      {"alpha", c.arena.alpha},
      {"arena_w", c.arena.arena_w},
      {"arena_h", c.arena.arena_h},
      {"fov_half_angle", c.arena.fov_half_angle},
      {"fov_range", c.arena.fov_range},
      {"agent_radius", c.arena.agent_radius},
      {"max_episode_steps", c.arena.max_episode_steps},
      {"lost_limit_steps", c.arena.lost_limit_steps},
  };
  if (c.arena.n_distractors == kRandomDistractors) {
    j["arena"]["n_distractors"] = "random";
  } else {
    j["arena"]["n_distractors"] = c.arena.n_distractors;
  }
  j["reward"] = {{"rho_star", c.reward.rho_star},
                 {"theta_star", c.reward.theta_star},
                 {"rho_max", c.reward.rho_max},
                 {"theta_max", c.reward.theta_max},
                 {"collision_penalty", c.reward.collision_penalty}};
  j["obs"] = {{"rho_max", c.obs.rho_max}};
  j["detection"] = {{"noise_std_rho", c.detection.noise_std_rho},
                    {"noise_std_theta", c.detection.noise_std_theta},
                    {"appearance_pool", c.detection.appearance_pool},
                    {"unique_appearances", c.detection.unique_appearances}};
  j["nav"] = {{"waypoint_radius", c.nav.waypoint_radius},
              {"resample_steps", c.nav.resample_steps},
              {"speed_min", c.nav.speed_min},
              {"speed_max", c.nav.speed_max},
              {"bearing_turn", c.nav.bearing_turn},
              {"bearing_fwd_turn", c.nav.bearing_fwd_turn}};
  j["pid"] = {{"p_lin", c.pid.p_lin},
              {"p_ang", c.pid.p_ang},
              {"deadband_rho", c.pid.deadband_rho},
              {"deadband_theta", c.pid.deadband_theta}};
  auto rl_json = [](const RlConfig& r) {
    return json{{"total_steps", r.total_steps},
                {"n_step", r.n_step},
                {"gamma", r.gamma},
                {"entropy_w_tracker", r.entropy_w_tracker},
                {"entropy_w_adversary", r.entropy_w_adversary},
                {"lr", r.lr},
                {"workers", r.workers},
                {"reward_norm", r.reward_norm},
                {"snapshot_interval", r.snapshot_interval},
                {"clip_norm", r.clip_norm},
                {"sync_workers", r.sync_workers}};
  };
  j["rl"] = rl_json(c.rl);
  j["finetune"] = rl_json(c.finetune);
  j["distill"] = {{"total_steps", c.distill.total_steps},
                  {"buffer_capacity", c.distill.buffer_capacity},
                  {"batch_size", c.distill.batch_size},
                  {"window", c.distill.window},
                  {"lr", c.distill.lr},
                  {"samplers", c.distill.samplers},
                  {"updates_per_episode", c.distill.updates_per_episode},
                  {"onehot_teacher", c.distill.onehot_teacher},
                  {"clip_norm", c.distill.clip_norm},
                  {"n_distractors", c.distill.n_distractors},
                  {"scripted_opponents", c.distill.scripted_opponents},
                  {"scripted_mix", c.distill.scripted_mix}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"probe_episodes", c.eval.probe_episodes},
               {"adv_budget", c.eval.adv_budget},
               {"adv_seeds", c.eval.adv_seeds},
               {"adv_distractors", c.eval.adv_distractors}};
  j["tracker_net"] = net_to_json(c.tracker_net);
  j["adversary_net"] = net_to_json(c.adversary_net);
  j["student_net"] = net_to_json(c.student_net);
  return j;
}

FullConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  FullConfig c = default_config();
  StrictObject root(j, "config");
  if (const json* preset = root.child("preset")) {
    const std::string name = preset->get<std::string>();
    if (name == "paper") {
      apply_paper_scale(c);
    } else if (name != "desk") {
      throw ConfigError("preset must be 'desk' or 'paper', got '" + name + "'");
    }
  }
  if (const json* s = root.child("arena")) parse_arena(*s, c.arena);
  if (const json* s = root.child("reward")) parse_reward(*s, c.reward);
  if (const json* s = root.child("obs")) parse_obs(*s, c.obs);
  if (const json* s = root.child("detection")) parse_detection(*s, c.detection);
  if (const json* s = root.child("nav")) parse_nav(*s, c.nav);
  if (const json* s = root.child("pid")) parse_pid(*s, c.pid);
  if (const json* s = root.child("rl")) parse_rl(*s, "rl", c.rl);
  if (const json* s = root.child("finetune")) parse_rl(*s, "finetune", c.finetune);
  if (const json* s = root.child("distill")) parse_distill(*s, c.distill);
  if (const json* s = root.child("eval")) parse_eval(*s, c.eval);
  if (const json* s = root.child("tracker_net")) {
    parse_net(*s, "tracker_net", c.tracker_net);
  }
  if (const json* s = root.child("adversary_net")) {
    parse_net(*s, "adversary_net", c.adversary_net);
  }
  if (const json* s = root.child("student_net")) {
    parse_net(*s, "student_net", c.student_net);
  }
  root.finish();
  return c;
}

FullConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

FullConfig apply_overrides(const FullConfig& base,
                           const std::vector<std::string>& overrides) {
  if (overrides.empty()) return base;
  json j = config_to_json(base);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must look like section.key=value, got '" +
                        item + "'");
    }
    std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // unquoted strings pass through
    }
    std::string pointer = "/" + key;
    for (auto& ch : pointer) {
      if (ch == '.') ch = '/';
    }
    try {
      j[json::json_pointer(pointer)] = value;
    } catch (const json::exception&) {
      throw ConfigError("cannot apply override '" + item + "'");
    }
  }
  return config_from_json(j);
}

}  // namespace dart
