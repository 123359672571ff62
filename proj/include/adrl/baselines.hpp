#pragma once

// Comparison agents.
//  DdpgAgent    one worker on one view, plain DDPG
//  ConcatAgent  per-view encoders whose features are concatenated into one actor-critic
//  ensemble     independently trained workers whose actions are combined at test time

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "adrl/combiners.hpp"
#include "adrl/coordinator.hpp"

namespace adrl {

namespace detail {
inline void write_net(const std::filesystem::path& p, const DenseNet& n) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  n.save(os);
}
inline DenseNet read_net(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot read " + p.string());
  return DenseNet::load(is);
}
}  // namespace detail

/// Shared loop for agents that act alone with a fixed exploration scale.
/// Agent needs act(obs), store(obs, a, r, next, terminal), ready(), update(rng).
template <class Agent>
EpisodeStats run_single_agent_episode(Agent& agent, MultiViewEnv& env, std::uint64_t env_seed, double epsilon,
                                      Rng& explore, Rng& replay, long& total_steps, long step_limit = 0) {
  EpisodeStats st;
  st.stage = 1;
  st.worker = 0;
  StepResult cur = env.reset(env_seed);
  for (long taken = 0; !cur.terminal && (step_limit <= 0 || taken < step_limit); ++taken) {
    const Vector action = perturb_action(agent.act(cur.observations), epsilon, explore);
    StepResult next = env.step(action);
    agent.store(cur.observations, action, next.reward, next.observations, next.off_road);
    if (agent.ready()) agent.update(replay);
    st.ret += next.reward;
    ++total_steps;
    cur = std::move(next);
  }
  st.shaped_ret = st.ret;
  st.steps = cur.steps;
  st.distance = cur.distance;
  st.time = cur.time;
  st.off_road = cur.off_road;
  st.epsilons = Vector::Constant(1, epsilon);
  st.global_epsilon = epsilon;
  return st;
}

/// Same iteration/episode bookkeeping and seeds as Coordinator::train, single learner.
template <class Agent>
void train_single_agent(Agent& agent, MultiViewEnv& env, const AdrlConfig& cfg, std::uint64_t seed,
                        const Coordinator::EpisodeCallback& on_episode,
                        const Coordinator::IterationCallback& on_iteration) {
  Rng explore = make_rng(seed, "explore", 0);
  Rng replay = make_rng(seed, "replay", 0);
  long episode = 0;
  long steps = 0;
  const auto spent = [&] { return cfg.max_train_steps > 0 && steps >= cfg.max_train_steps; };
  for (int i = 1; i <= cfg.schedule.iterations; ++i) {
    for (int j = 0; j < cfg.schedule.episodes_per_iteration && !spent(); ++j) {
      EpisodeStats st = run_single_agent_episode(agent, env, derive_seed(seed, "env", static_cast<std::uint64_t>(episode)),
                                                 cfg.exploration.eps_min, explore, replay, steps,
                                                 cfg.max_train_steps > 0 ? cfg.max_train_steps - steps : 0);
      st.iteration = i;
      st.episode = episode++;
      if (on_episode) on_episode(st);
    }
    if (on_iteration) on_iteration(i);
    if (spent()) break;
  }
}

/// Single-view DDPG. With the same seed it retraces a one-view coordinator exactly.
class DdpgAgent {
 public:
  DdpgAgent(const EnvConfig& env_cfg, const AdrlConfig& cfg, std::uint64_t seed, int view = 0)
      : cfg_(cfg), seed_(seed), view_(view), env_(env_cfg), worker_(make_worker(env_cfg, cfg, seed)) {
    cfg_.validate();
    if (view < 0 || view >= env_cfg.num_views) throw ConfigError("ddpg: view index out of range");
  }

  Vector act(const std::vector<Vector>& obs) const { return worker_.propose(obs.at(static_cast<std::size_t>(view_))); }

  void store(const std::vector<Vector>& obs, const Vector& a, double r, const std::vector<Vector>& next, bool terminal) {
    const auto v = static_cast<std::size_t>(view_);
    worker_.buffer.store({{obs[v]}, a, r, {next[v]}, terminal});
  }
  bool ready() const { return worker_.ready(); }
  void update(Rng& rng) { worker_.update(rng); }

  void train(const Coordinator::EpisodeCallback& on_episode = {}, const Coordinator::IterationCallback& on_iteration = {}) {
    train_single_agent(*this, env_, cfg_, seed_, on_episode, on_iteration);
  }

  Worker& worker() { return worker_; }
  const Worker& worker() const { return worker_; }
  MultiViewEnv& env() { return env_; }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    detail::write_net(dir / "encoder.net", worker_.view.encoder);
    detail::write_net(dir / "trunk.net", worker_.view.trunk);
    detail::write_net(dir / "actor.net", worker_.heads.actor);
    detail::write_net(dir / "critic.net", worker_.heads.critic);
  }

  void load(const std::filesystem::path& dir) {
    worker_.view.encoder = detail::read_net(dir / "encoder.net");
    worker_.view.trunk = detail::read_net(dir / "trunk.net");
    worker_.heads.actor = detail::read_net(dir / "actor.net");
    worker_.heads.critic = detail::read_net(dir / "critic.net");
  }

 private:
  static Worker make_worker(const EnvConfig& env_cfg, const AdrlConfig& cfg, std::uint64_t seed) {
    Rng init = make_rng(seed, "init");
    return Worker(env_cfg.view_dim, MultiViewEnv::action_dim(), cfg.sizes, cfg.hyper, init);
  }

  AdrlConfig cfg_;
  std::uint64_t seed_;
  int view_;
  MultiViewEnv env_;
  Worker worker_;
};

/// States are the stacked features of every view encoder; the critic gradient
/// reaches all of them.
class ConcatEncoder {
 public:
  explicit ConcatEncoder(std::vector<ViewEncoder>& views) : views_(views) {}

  Matrix encode(const Batch& b) {
    enc_tapes_.resize(views_.size());
    trunk_tapes_.resize(views_.size());
    std::vector<Matrix> parts;
    for (std::size_t w = 0; w < views_.size(); ++w) {
      const Matrix e = views_[w].encoder.forward_batch(stack_view(b, w, false), enc_tapes_[w]);
      parts.push_back(views_[w].trunk.forward_batch(e, trunk_tapes_[w]));
    }
    return stack(parts);
  }

  Matrix encode_next(const Batch& b) {
    std::vector<Matrix> parts;
    for (std::size_t w = 0; w < views_.size(); ++w) parts.push_back(views_[w].target_features_batch(stack_view(b, w, true)));
    return stack(parts);
  }

  Matrix encode_detached(const Batch& b) {
    std::vector<Matrix> parts;
    for (std::size_t w = 0; w < views_.size(); ++w) parts.push_back(views_[w].features_batch(stack_view(b, w, false)));
    return stack(parts);
  }

  void backward(const Matrix& d_states) {
    Eigen::Index row = 0;
    for (std::size_t w = 0; w < views_.size(); ++w) {
      auto& v = views_[w];
      const auto dim = static_cast<Eigen::Index>(v.feature_dim());
      Buffer g_trunk(v.trunk.num_params(), 0.0);
      Buffer g_enc(v.encoder.num_params(), 0.0);
      const Matrix d_e = v.trunk.backward(trunk_tapes_[w], d_states.middleRows(row, dim), g_trunk);
      v.encoder.backward(enc_tapes_[w], d_e, g_enc);
      check_finite(g_trunk, "trunk gradient (concat)");
      check_finite(g_enc, "encoder gradient (concat)");
      optimizer_step(v.trunk_opt, v.trunk.params(), g_trunk);
      optimizer_step(v.encoder_opt, v.encoder.params(), g_enc);
      row += dim;
    }
  }

 private:
  static Matrix stack(const std::vector<Matrix>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.rows();
    Matrix out(rows, parts.front().cols());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      out.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    return out;
  }

  std::vector<ViewEncoder>& views_;
  std::vector<Tape> enc_tapes_;
  std::vector<Tape> trunk_tapes_;
};

/// Feature-concatenation agent (FT-COMB).
class ConcatAgent {
 public:
  ConcatAgent(const EnvConfig& env_cfg, const AdrlConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), seed_(seed), env_(env_cfg), buffer_(cfg.hyper.replay_capacity) {
    cfg_.validate();
    Rng init = make_rng(seed, "init");
    for (int w = 0; w < env_cfg.num_views; ++w) views_.emplace_back(env_cfg.view_dim, cfg.sizes, cfg.hyper.critic_lr, init);
    heads_ = ActorCritic(cfg.sizes.feature_dim() * env_cfg.num_views, MultiViewEnv::action_dim(), cfg.sizes.head,
                         cfg.hyper, init);
  }

  Vector features(const std::vector<Vector>& obs) const {
    require_shape(obs.size() == views_.size(), "ConcatAgent: one observation per view");
    std::vector<Vector> parts;
    for (std::size_t w = 0; w < views_.size(); ++w) parts.push_back(views_[w].features(obs[w]));
    return concat_features(parts);
  }

  Vector act(const std::vector<Vector>& obs) const { return heads_.act(features(obs)); }

  void store(const std::vector<Vector>& obs, const Vector& a, double r, const std::vector<Vector>& next, bool terminal) {
    buffer_.store({obs, a, r, next, terminal});
  }

  bool ready() const {
    return buffer_.size() >= std::max<std::size_t>(cfg_.hyper.warmup, static_cast<std::size_t>(cfg_.hyper.batch_size));
  }

  void update(Rng& rng) {
    const Batch batch = buffer_.sample(static_cast<std::size_t>(cfg_.hyper.batch_size), rng);
    ConcatEncoder enc(views_);
    critic_update(heads_, batch, enc, cfg_.hyper.gamma);
    actor_update(heads_, batch, enc);
    heads_.soft_update_targets(cfg_.hyper.tau);
    for (auto& v : views_) v.soft_update(cfg_.hyper.tau);
  }

  void train(const Coordinator::EpisodeCallback& on_episode = {}, const Coordinator::IterationCallback& on_iteration = {}) {
    train_single_agent(*this, env_, cfg_, seed_, on_episode, on_iteration);
  }

  MultiViewEnv& env() { return env_; }
  const ActorCritic& heads() const { return heads_; }

  /// <dir>/view_<w>/{encoder,trunk}.net, <dir>/{actor,critic}.net
  void save(const std::filesystem::path& dir) const {
    for (std::size_t w = 0; w < views_.size(); ++w) {
      const auto d = dir / ("view_" + std::to_string(w));
      std::filesystem::create_directories(d);
      detail::write_net(d / "encoder.net", views_[w].encoder);
      detail::write_net(d / "trunk.net", views_[w].trunk);
    }
    detail::write_net(dir / "actor.net", heads_.actor);
    detail::write_net(dir / "critic.net", heads_.critic);
  }

  void load(const std::filesystem::path& dir) {
    for (std::size_t w = 0; w < views_.size(); ++w) {
      const auto d = dir / ("view_" + std::to_string(w));
      views_[w].encoder = detail::read_net(d / "encoder.net");
      views_[w].trunk = detail::read_net(d / "trunk.net");
    }
    heads_.actor = detail::read_net(dir / "actor.net");
    heads_.critic = detail::read_net(dir / "critic.net");
  }

 private:
  AdrlConfig cfg_;
  std::uint64_t seed_;
  MultiViewEnv env_;
  std::vector<ViewEncoder> views_;
  ActorCritic heads_;
  ReplayBuffer buffer_;
};

/// Workers of a coordinator trained without joint training, combined by `how`.
inline Vector ensemble_action(const Coordinator& c, const std::vector<Vector>& obs, Combiner how) {
  const ActionMatrix a = c.proposals(obs);
  ActionSet set;
  for (Eigen::Index w = 0; w < a.cols(); ++w) set.push_back(a.col(w));
  return combine(how, set);
}

}  // namespace adrl
