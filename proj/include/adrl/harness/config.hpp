#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adrl/coordinator.hpp"

namespace adrl {

using Json = nlohmann::json;

enum class Method { adrl, ddpg, act_avg, act_cnt, act_mjv, ft_comb };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::adrl: return "ADRL";
    case Method::ddpg: return "DDPG";
    case Method::act_avg: return "ACT-AVG";
    case Method::act_cnt: return "ACT-CNT";
    case Method::act_mjv: return "ACT-MJV";
    case Method::ft_comb: return "FT-COMB";
  }
  return "?";
}

inline std::optional<Method> method_from_string(const std::string& s) {
  for (Method m : {Method::adrl, Method::ddpg, Method::act_avg, Method::act_cnt, Method::act_mjv, Method::ft_comb})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

/// Test-time changes applied to the evaluation environment.
struct NoiseProtocol {
  double env_sigma2 = 0.0;          // sigma^2_E on every view, train and test
  std::optional<int> perturb_view;  // view whose test-time variance becomes perturb_sigma2
  double perturb_sigma2 = 0.05;     // sigma^2_P
  std::vector<int> irrelevant_views;
  long adaptation_steps = 0;  // stage-2 steps on the altered env before evaluation (ADRL)
};

struct ExperimentConfig {
  std::string name = "run";
  Method method = Method::adrl;
  EnvConfig env;
  AdrlConfig agent;
  std::vector<std::uint64_t> seeds{1};
  int eval_episodes = 20;
  int ddpg_view = 0;
  NoiseProtocol noise;
  bool checkpoints = true;
};

namespace detail {

/// Reads fields out of a JSON object, remembering every problem instead of stopping at the first.
class FieldReader {
 public:
  FieldReader(const Json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  ~FieldReader() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) errors_.push_back(path_ + "." + it.key() + ": unknown field");
  }

  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      errors_.push_back(path_ + "." + key + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& msg, std::vector<std::string>& errors) {
  if (!ok) errors.push_back(msg);
}

}  // namespace detail

inline void read_track(const Json& j, TrackConfig& t, std::vector<std::string>& errors) {
  detail::FieldReader r(j, "env.track", errors);
  r.get("kind", t.kind);
  r.get("straight", t.straight);
  r.get("radius", t.radius);
  r.get("chicane_amplitude", t.chicane_amplitude);
  r.get("chicane_length", t.chicane_length);
  r.get("spacing", t.spacing);
  r.get("length", t.length);
  r.get("closed", t.closed);
  r.get("half_width", t.half_width);
  std::vector<std::vector<double>> pts;
  r.get("points", pts);
  for (const auto& p : pts) {
    if (p.size() != 2) {
      errors.push_back("env.track.points: every point needs two coordinates");
      break;
    }
    t.points.emplace_back(p[0], p[1]);
  }
}

inline void read_env(const Json& j, EnvConfig& e, std::vector<std::string>& errors) {
  detail::FieldReader r(j, "env", errors);
  r.get("num_views", e.num_views);
  r.get("view_dim", e.view_dim);
  r.get("diversity", e.diversity);
  r.get("view_seed", e.view_seed);
  r.get("masks", e.masks);
  if (const Json* t = r.child("track")) read_track(*t, e.track, errors);
  if (const Json* d = r.child("dynamics")) {
    detail::FieldReader dr(*d, "env.dynamics", errors);
    dr.get("dt", e.dynamics.dt);
    dr.get("v_max", e.dynamics.v_max);
    dr.get("steer_rate", e.dynamics.steer_rate);
    dr.get("accel_rate", e.dynamics.accel_rate);
    dr.get("max_steps", e.dynamics.max_steps);
  }
}

/// Semantic checks; appends one message per violated rule.
inline void validate(const ExperimentConfig& c, std::vector<std::string>& errors) {
  using detail::check;
  auto capture = [&](auto&& f) {
    try {
      f();
    } catch (const std::exception& ex) {
      errors.push_back(ex.what());
    }
  };
  const auto& a = c.agent;
  check(a.hyper.gamma >= 0.0 && a.hyper.gamma < 1.0, "agent.gamma must lie in [0, 1)", errors);
  check(a.hyper.actor_lr > 0.0, "agent.actor_lr must be positive", errors);
  check(a.hyper.critic_lr > 0.0, "agent.critic_lr must be positive", errors);
  check(a.hyper.batch_size >= 1, "agent.batch_size must be at least 1", errors);
  check(a.hyper.tau > 0.0 && a.hyper.tau <= 1.0, "agent.tau must lie in (0, 1]", errors);
  check(a.hyper.replay_capacity > 0, "agent.replay_capacity must be positive", errors);
  check(!a.sizes.encoder.empty() && !a.sizes.trunk.empty() && !a.sizes.head.empty(),
        "agent: encoder, trunk and head need at least one layer each", errors);
  for (const auto* v : {&a.sizes.encoder, &a.sizes.trunk, &a.sizes.head})
    for (int s : *v) check(s > 0, "agent: layer widths must be positive", errors);
  check(a.gamma_r >= 0.0, "gamma_r must be nonnegative", errors);
  check(a.max_train_steps >= 0, "max_train_steps must be nonnegative", errors);
  check(a.exploration.window > 0, "exploration.window must be positive", errors);
  check(a.exploration.kappa >= 0.0, "exploration.kappa must be nonnegative", errors);
  check(a.exploration.eps_min >= 0.0 && a.exploration.eps_min <= a.exploration.eps_max,
        "exploration: need 0 <= eps_min <= eps_max", errors);
  check(a.schedule.iterations >= 0, "schedule.iterations must be nonnegative", errors);
  check(a.schedule.episodes_per_iteration >= 1, "schedule.episodes_per_iteration must be positive", errors);
  check(a.schedule.ratio_first > 0.0 && a.schedule.ratio_last > 0.0, "schedule ratios must be positive", errors);
  capture([&] { c.env.validate(); });
  capture([&] { (void)c.env.track.build(); });
  check(!c.seeds.empty(), "seeds: need at least one seed", errors);
  check(c.eval_episodes >= 1, "eval_episodes must be positive", errors);
  check(c.ddpg_view >= 0 && c.ddpg_view < c.env.num_views, "ddpg_view out of range", errors);
  const auto& n = c.noise;
  check(n.env_sigma2 >= 0.0, "noise.env_sigma2 must be nonnegative", errors);
  check(n.perturb_sigma2 >= 0.0, "noise.perturb_sigma2 must be nonnegative", errors);
  if (n.perturb_view)
    check(*n.perturb_view >= 0 && *n.perturb_view < c.env.num_views, "noise.perturb_view out of range", errors);
  for (int v : n.irrelevant_views)
    check(v >= 0 && v < c.env.num_views, "noise.irrelevant_views: index " + std::to_string(v) + " out of range", errors);
  check(n.adaptation_steps >= 0, "noise.adaptation_steps must be nonnegative", errors);
  check(n.adaptation_steps == 0 || c.method == Method::adrl, "noise.adaptation_steps applies to ADRL only", errors);
}

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = std::to_string(errors.size()) + " configuration error(s):";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

/// Parses a configuration; every structural and semantic problem is reported in one ConfigError.
inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  std::vector<std::string> errors;
  {
    detail::FieldReader r(j, "config", errors);
    r.get("name", c.name);
    std::string method = to_string(c.method);
    r.get("method", method);
    if (auto m = method_from_string(method)) c.method = *m;
    else errors.push_back("config.method: unknown method '" + method + "'");
    r.get("seeds", c.seeds);
    r.get("eval_episodes", c.eval_episodes);
    r.get("ddpg_view", c.ddpg_view);
    r.get("checkpoints", c.checkpoints);
    r.get("gamma_r", c.agent.gamma_r);
    r.get("max_train_steps", c.agent.max_train_steps);
    if (const Json* e = r.child("env")) read_env(*e, c.env, errors);
    if (const Json* s = r.child("schedule")) {
      detail::FieldReader sr(*s, "schedule", errors);
      sr.get("iterations", c.agent.schedule.iterations);
      sr.get("episodes_per_iteration", c.agent.schedule.episodes_per_iteration);
      sr.get("ratio_first", c.agent.schedule.ratio_first);
      sr.get("ratio_last", c.agent.schedule.ratio_last);
      sr.get("stage2", c.agent.stage2);
    }
    if (const Json* a = r.child("agent")) {
      detail::FieldReader ar(*a, "agent", errors);
      auto& h = c.agent.hyper;
      ar.get("gamma", h.gamma);
      ar.get("actor_lr", h.actor_lr);
      ar.get("critic_lr", h.critic_lr);
      ar.get("batch_size", h.batch_size);
      ar.get("tau", h.tau);
      ar.get("replay_capacity", h.replay_capacity);
      ar.get("warmup", h.warmup);
      ar.get("encoder", c.agent.sizes.encoder);
      ar.get("trunk", c.agent.sizes.trunk);
      ar.get("head", c.agent.sizes.head);
    }
    if (const Json* x = r.child("exploration")) {
      detail::FieldReader xr(*x, "exploration", errors);
      xr.get("window", c.agent.exploration.window);
      xr.get("kappa", c.agent.exploration.kappa);
      xr.get("eps_min", c.agent.exploration.eps_min);
      xr.get("eps_max", c.agent.exploration.eps_max);
    }
    if (const Json* n = r.child("noise")) {
      detail::FieldReader nr(*n, "noise", errors);
      nr.get("env_sigma2", c.noise.env_sigma2);
      int view = -1;
      nr.get("perturb_view", view);
      if (view >= 0) c.noise.perturb_view = view;
      nr.get("perturb_sigma2", c.noise.perturb_sigma2);
      nr.get("irrelevant_views", c.noise.irrelevant_views);
      nr.get("adaptation_steps", c.noise.adaptation_steps);
    }
  }
  c.env.sigma2 = c.noise.env_sigma2;
  validate(c, errors);
  if (!errors.empty()) throw ConfigError(join_errors(errors));
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  const auto& e = c.env;
  const auto& a = c.agent;
  Json track = {{"kind", e.track.kind},
                {"straight", e.track.straight},
                {"radius", e.track.radius},
                {"chicane_amplitude", e.track.chicane_amplitude},
                {"chicane_length", e.track.chicane_length},
                {"spacing", e.track.spacing},
                {"length", e.track.length},
                {"closed", e.track.closed},
                {"half_width", e.track.half_width}};
  Json pts = Json::array();
  for (const auto& p : e.track.points) pts.push_back({p.x(), p.y()});
  track["points"] = pts;
  return {
      {"name", c.name},
      {"method", to_string(c.method)},
      {"seeds", c.seeds},
      {"eval_episodes", c.eval_episodes},
      {"ddpg_view", c.ddpg_view},
      {"checkpoints", c.checkpoints},
      {"gamma_r", a.gamma_r},
      {"max_train_steps", a.max_train_steps},
      {"env",
       {{"num_views", e.num_views},
        {"view_dim", e.view_dim},
        {"diversity", e.diversity},
        {"view_seed", e.view_seed},
        {"masks", e.masks},
        {"track", track},
        {"dynamics",
         {{"dt", e.dynamics.dt},
          {"v_max", e.dynamics.v_max},
          {"steer_rate", e.dynamics.steer_rate},
          {"accel_rate", e.dynamics.accel_rate},
          {"max_steps", e.dynamics.max_steps}}}}},
      {"schedule",
       {{"iterations", a.schedule.iterations},
        {"episodes_per_iteration", a.schedule.episodes_per_iteration},
        {"ratio_first", a.schedule.ratio_first},
        {"ratio_last", a.schedule.ratio_last},
        {"stage2", a.stage2}}},
      {"agent",
       {{"gamma", a.hyper.gamma},
        {"actor_lr", a.hyper.actor_lr},
        {"critic_lr", a.hyper.critic_lr},
        {"batch_size", a.hyper.batch_size},
        {"tau", a.hyper.tau},
        {"replay_capacity", a.hyper.replay_capacity},
        {"warmup", a.hyper.warmup},
        {"encoder", a.sizes.encoder},
        {"trunk", a.sizes.trunk},
        {"head", a.sizes.head}}},
      {"exploration",
       {{"window", a.exploration.window},
        {"kappa", a.exploration.kappa},
        {"eps_min", a.exploration.eps_min},
        {"eps_max", a.exploration.eps_max}}},
      {"noise",
       {{"env_sigma2", c.noise.env_sigma2},
        {"perturb_view", c.noise.perturb_view.value_or(-1)},
        {"perturb_sigma2", c.noise.perturb_sigma2},
        {"irrelevant_views", c.noise.irrelevant_views},
        {"adaptation_steps", c.noise.adaptation_steps}}},
  };
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

/// Runs are comparable when they share the environment and its training-time noise.
inline bool same_env(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a)["env"] == config_to_json(b)["env"] && a.noise.env_sigma2 == b.noise.env_sigma2;
}

}  // namespace adrl
