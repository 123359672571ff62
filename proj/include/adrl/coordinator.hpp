#pragma once

// Two-stage multi-view training.
//
// Stage 1: worker w drives the car on its own view while every worker proposes
// an action on its own view of the same state; the proposals drive the
// deviation penalty and the exploration scales.
// Stage 2: the global actor-critic acts on the attention-fused worker features;
// its critic gradient also trains the worker trunks and the attention gains.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "adrl/attention.hpp"
#include "adrl/env/multiview_env.hpp"
#include "adrl/schedule.hpp"
#include "adrl/shaping.hpp"

namespace adrl {

struct AdrlConfig {
  AgentHyper hyper;
  NetSizes sizes;
  ExplorationParams exploration;
  TrainingSchedule schedule;
  double gamma_r = 0.1;
  bool stage2 = true;         // false: workers only (ensemble baselines)
  long max_train_steps = 0;   // 0 = no step budget

  void validate() const {
    hyper.validate();
    exploration.validate();
    schedule.validate();
    if (gamma_r < 0.0) throw ConfigError("gamma_r must be nonnegative");
    if (max_train_steps < 0) throw ConfigError("max_train_steps must be nonnegative");
  }
};

inline constexpr int kGlobalWorker = -1;

struct EpisodeStats {
  int iteration = 0;
  int stage = 1;
  long episode = 0;
  int worker = kGlobalWorker;
  double ret = 0.0;
  double shaped_ret = 0.0;
  int steps = 0;
  double distance = 0.0;
  double time = 0.0;
  bool off_road = false;
  double mean_deviation = 0.0;  // across-worker deviation of the deterministic proposals
  Vector epsilons;              // eps^(w) at episode end
  double global_epsilon = 0.0;
  Vector attention_mean;        // stage 2 only
  std::vector<Vector> attention;  // stage 2 only, one row per step
};

class Coordinator {
 public:
  using EpisodeCallback = std::function<void(const EpisodeStats&)>;
  using IterationCallback = std::function<void(int)>;

  Coordinator(const EnvConfig& env_cfg, const AdrlConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        seed_(seed),
        env_(env_cfg),
        exploration_(env_cfg.num_views, cfg.exploration),
        global_buffer_(cfg.hyper.replay_capacity) {
    cfg_.validate();
    Rng init = make_rng(seed, "init");
    const int n = env_cfg.num_views;
    workers_.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
      workers_.emplace_back(env_cfg.view_dim, MultiViewEnv::action_dim(), cfg.sizes, cfg.hyper, init);
      explore_rngs_.push_back(make_rng(seed, "explore", static_cast<std::uint64_t>(w)));
      replay_rngs_.push_back(make_rng(seed, "replay", static_cast<std::uint64_t>(w)));
    }
    global_ = ActorCritic(cfg.sizes.feature_dim(), MultiViewEnv::action_dim(), cfg.sizes.head, cfg.hyper, init);
    gate_ = AttentionGate(n, cfg.hyper.critic_lr);
    explore_global_ = make_rng(seed, "explore-global");
    replay_global_ = make_rng(seed, "replay-global");
  }

  const AdrlConfig& config() const { return cfg_; }
  int num_workers() const { return static_cast<int>(workers_.size()); }
  std::vector<Worker>& workers() { return workers_; }
  const std::vector<Worker>& workers() const { return workers_; }
  AttentionGate& gate() { return gate_; }
  const AttentionGate& gate() const { return gate_; }
  ActorCritic& global() { return global_; }
  const ActorCritic& global() const { return global_; }
  ExplorationSchedule& exploration() { return exploration_; }
  const ReplayBuffer& global_buffer() const { return global_buffer_; }
  MultiViewEnv& env() { return env_; }
  long total_steps() const { return total_steps_; }
  bool shaping_active() const { return shaping_active_; }
  void set_shaping_active(bool on) { shaping_active_ = on; }

  /// With one view there is nothing to attend over: the lone worker is the policy.
  bool single_view() const { return workers_.size() == 1; }

  ActionMatrix proposals(const std::vector<Vector>& observations) const {
    require_shape(observations.size() == workers_.size(), "proposals: one observation per worker");
    ActionMatrix a(MultiViewEnv::action_dim(), static_cast<Eigen::Index>(workers_.size()));
    for (std::size_t v = 0; v < workers_.size(); ++v)
      a.col(static_cast<Eigen::Index>(v)) = workers_[v].propose(observations[v]);
    return a;
  }

  /// Worker w acts on view w; its buffer receives (s^(w), a, r^c, s'^(w)).
  /// A positive `step_limit` truncates the episode.
  EpisodeStats run_stage1_episode(int w, MultiViewEnv& env, std::uint64_t env_seed, long step_limit = 0) {
    require_shape(w >= 0 && w < num_workers(), "run_stage1_episode: worker index out of range");
    require_shape(env.num_views() == num_workers(), "run_stage1_episode: env views != workers");
    auto& worker = workers_[static_cast<std::size_t>(w)];
    EpisodeStats st;
    st.stage = 1;
    st.worker = w;
    StepResult cur = env.reset(env_seed);
    double dev_sum = 0.0;
    long taken = 0;
    while (!cur.terminal && (step_limit <= 0 || taken < step_limit)) {
      ++taken;
      const ActionMatrix props = proposals(cur.observations);
      const Vector action = perturb_action(props.col(w), exploration_.epsilon(w),
                                           explore_rngs_[static_cast<std::size_t>(w)]);
      StepResult next = env.step(action);
      const Deviation dev = deviation(props);
      exploration_.update(dev.per_worker);
      dev_sum += dev.mean;

      double reward = next.reward;
      if (shaping_active_) {
        ActionMatrix taken = props;
        taken.col(w) = action;
        reward = shape_reward(next.reward, taken, cfg_.gamma_r).shaped;
      }
      worker.buffer.store({{cur.observations[static_cast<std::size_t>(w)]}, action, reward,
                           {next.observations[static_cast<std::size_t>(w)]}, next.off_road});
      if (worker.ready()) worker.update(replay_rngs_[static_cast<std::size_t>(w)]);

      st.ret += next.reward;
      st.shaped_ret += reward;
      ++total_steps_;
      cur = std::move(next);
    }
    finish(st, cur, dev_sum);
    return st;
  }

  /// The global network drives; every view is fused through the attention gate.
  /// A positive `step_limit` truncates the episode.
  EpisodeStats run_stage2_episode(MultiViewEnv& env, std::uint64_t env_seed, long step_limit = 0) {
    require_shape(env.num_views() == num_workers(), "run_stage2_episode: env views != workers");
    EpisodeStats st;
    st.stage = 2;
    st.worker = kGlobalWorker;
    StepResult cur = env.reset(env_seed);
    double dev_sum = 0.0;
    long taken = 0;
    while (!cur.terminal && (step_limit <= 0 || taken < step_limit)) {
      ++taken;
      const AttentionStep att = attend(workers_, gate_, cur.observations);
      gate_.last_f = att.f;
      gate_.last_p = att.p;
      const Vector action = perturb_action(global_.act(att.x), exploration_.global_epsilon(), explore_global_);
      StepResult next = env.step(action);

      ActionMatrix props(MultiViewEnv::action_dim(), num_workers());
      for (int v = 0; v < num_workers(); ++v) props.col(v) = att.proposals[static_cast<std::size_t>(v)];
      const Deviation dev = deviation(props);
      exploration_.update(dev.per_worker);
      dev_sum += dev.mean;
      const double reward = shaping_active_ ? next.reward - cfg_.gamma_r * dev.mean : next.reward;

      global_buffer_.store({cur.observations, action, reward, next.observations, next.off_road});
      if (global_buffer_.size() >= std::max<std::size_t>(cfg_.hyper.warmup, cfg_.hyper.batch_size))
        joint_update();

      st.attention.push_back(att.p);
      st.ret += next.reward;
      st.shaped_ret += reward;
      ++total_steps_;
      cur = std::move(next);
    }
    finish(st, cur, dev_sum);
    st.attention_mean = Vector::Zero(num_workers());
    for (const auto& p : st.attention) st.attention_mean += p;
    if (!st.attention.empty()) st.attention_mean /= static_cast<double>(st.attention.size());
    return st;
  }

  /// One critic and one actor step of the global network on a replay batch.
  /// The critic gradient continues through the fusion into the worker trunks and gains.
  UpdateStats joint_update() {
    const Batch batch = global_buffer_.sample(static_cast<std::size_t>(cfg_.hyper.batch_size), replay_global_);
    AttentionEncoder enc(workers_, gate_);
    UpdateStats s;
    s.critic_loss = critic_update(global_, batch, enc, cfg_.hyper.gamma);
    s.mean_q = actor_update(global_, batch, enc);
    global_.soft_update_targets(cfg_.hyper.tau);
    for (auto& w : workers_) soft_update(w.view.trunk, w.view.trunk_target, cfg_.hyper.tau);
    return s;
  }

  /// Runs the full schedule. Stage-1 episodes cycle round-robin over workers;
  /// deviation shaping switches on with the first stage-2 episode.
  void train(const EpisodeCallback& on_episode = {}, const IterationCallback& on_iteration = {}) {
    const auto& sched = cfg_.schedule;
    for (int i = 1; i <= sched.iterations; ++i) {
      int worker_eps = sched.worker_episodes(i);
      int global_eps = sched.global_episodes(i);
      if (!cfg_.stage2 || single_view()) {
        worker_eps = sched.episodes_per_iteration;
        global_eps = 0;
      }
      for (int j = 0; j < worker_eps && !budget_spent(); ++j) {
        const int w = static_cast<int>(stage1_count_++ % workers_.size());
        EpisodeStats st = run_stage1_episode(w, env_, episode_seed(episode_), budget_left());
        emit(st, i, on_episode);
      }
      for (int j = 0; j < global_eps && !budget_spent(); ++j) {
        shaping_active_ = true;
        EpisodeStats st = run_stage2_episode(env_, episode_seed(episode_), budget_left());
        emit(st, i, on_episode);
      }
      if (on_iteration) on_iteration(i);
      if (budget_spent()) break;
    }
  }

  /// Continues joint training for `steps` environment steps on `env` (e.g. after
  /// the views changed at test time). A single-view coordinator has nothing to adapt.
  void adapt(MultiViewEnv& env, long steps, std::uint64_t seed) {
    if (single_view() || steps <= 0) return;
    shaping_active_ = true;
    long done = 0;
    for (std::uint64_t k = 0; done < steps; ++k) {
      const EpisodeStats st = run_stage2_episode(env, derive_seed(seed, "adapt", k), steps - done);
      done += st.steps;
    }
  }

  /// Deterministic deployed policy. Fills `info` with the attention step when given.
  Vector act(const std::vector<Vector>& observations, AttentionStep* info = nullptr) const {
    if (single_view()) return workers_.front().propose(observations.at(0));
    AttentionStep att = attend(workers_, gate_, observations);
    Vector a = global_.act(att.x);
    if (info) *info = std::move(att);
    return a;
  }

  std::uint64_t episode_seed(long episode) const {
    return derive_seed(seed_, "env", static_cast<std::uint64_t>(episode));
  }

  /// Online networks and gains:
  ///   <dir>/worker_<w>/{encoder,trunk,actor,critic}.net, <dir>/global/{actor,critic}.net, <dir>/gains.txt
  void save(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      const fs::path d = dir / ("worker_" + std::to_string(w));
      fs::create_directories(d);
      write_net(d / "encoder.net", workers_[w].view.encoder);
      write_net(d / "trunk.net", workers_[w].view.trunk);
      write_net(d / "actor.net", workers_[w].heads.actor);
      write_net(d / "critic.net", workers_[w].heads.critic);
    }
    fs::create_directories(dir / "global");
    write_net(dir / "global" / "actor.net", global_.actor);
    write_net(dir / "global" / "critic.net", global_.critic);
    std::ofstream g(dir / "gains.txt");
    g.precision(17);
    g << "adrl-gains 1\n" << gate_.gains.size() << "\n";
    for (Eigen::Index i = 0; i < gate_.gains.size(); ++i) g << gate_.gains[i] << "\n";
  }

  void load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      const fs::path d = dir / ("worker_" + std::to_string(w));
      load_into(d / "encoder.net", workers_[w].view.encoder);
      load_into(d / "trunk.net", workers_[w].view.trunk);
      load_into(d / "actor.net", workers_[w].heads.actor);
      load_into(d / "critic.net", workers_[w].heads.critic);
      workers_[w].view.encoder_target = workers_[w].view.encoder;
      workers_[w].view.trunk_target = workers_[w].view.trunk;
      workers_[w].heads.actor_target = workers_[w].heads.actor;
      workers_[w].heads.critic_target = workers_[w].heads.critic;
    }
    load_into(dir / "global" / "actor.net", global_.actor);
    load_into(dir / "global" / "critic.net", global_.critic);
    global_.actor_target = global_.actor;
    global_.critic_target = global_.critic;
    std::ifstream g(dir / "gains.txt");
    std::string magic;
    int version = 0;
    Eigen::Index n = 0;
    if (!(g >> magic >> version >> n) || magic != "adrl-gains" || version != 1 || n != gate_.gains.size())
      throw ConfigError("checkpoint: bad gains file in " + dir.string());
    for (Eigen::Index i = 0; i < n; ++i) g >> gate_.gains[i];
    if (!g) throw ConfigError("checkpoint: truncated gains file");
  }

 private:
  static void write_net(const std::filesystem::path& p, const DenseNet& net) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    net.save(os);
  }

  static void load_into(const std::filesystem::path& p, DenseNet& net) {
    std::ifstream is(p);
    if (!is) throw ConfigError("cannot read " + p.string());
    DenseNet loaded = DenseNet::load(is);
    if (loaded.layers().size() != net.layers().size() || loaded.num_params() != net.num_params())
      throw ConfigError("checkpoint: architecture mismatch in " + p.string());
    net = std::move(loaded);
  }

  bool budget_spent() const { return cfg_.max_train_steps > 0 && total_steps_ >= cfg_.max_train_steps; }
  long budget_left() const { return cfg_.max_train_steps > 0 ? cfg_.max_train_steps - total_steps_ : 0; }

  void finish(EpisodeStats& st, const StepResult& last, double dev_sum) const {
    st.steps = last.steps;
    st.distance = last.distance;
    st.time = last.time;
    st.off_road = last.off_road;
    st.mean_deviation = last.steps > 0 ? dev_sum / last.steps : 0.0;
    st.epsilons = exploration_.epsilons();
    st.global_epsilon = exploration_.global_epsilon();
  }

  void emit(EpisodeStats& st, int iteration, const EpisodeCallback& cb) {
    st.iteration = iteration;
    st.episode = episode_++;
    if (cb) cb(st);
  }

  AdrlConfig cfg_;
  std::uint64_t seed_;
  MultiViewEnv env_;
  std::vector<Worker> workers_;
  ActorCritic global_;
  AttentionGate gate_;
  ExplorationSchedule exploration_;
  ReplayBuffer global_buffer_;
  std::vector<Rng> explore_rngs_;
  std::vector<Rng> replay_rngs_;
  Rng explore_global_;
  Rng replay_global_;
  long episode_ = 0;
  long stage1_count_ = 0;
  long total_steps_ = 0;
  bool shaping_active_ = false;
};

}  // namespace adrl
