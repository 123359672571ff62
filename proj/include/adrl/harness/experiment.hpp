#pragma once

// Train / evaluate / compare / attention-report, with CSV outputs.
//
// Run directory layout (<root>/<name>/seed_<s>/):
//   config.json          resolved configuration
//   episodes.csv         one row per training episode
//   evaluation.csv       one row per evaluation episode
//   eval_attention.csv   per-step attention weights during evaluation (attention models)
//   summary.json         evaluation means and standard deviations
//   checkpoints/iter_NNNN/, model/   network snapshots

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "adrl/baselines.hpp"
#include "adrl/harness/config.hpp"
#include "adrl/harness/csv.hpp"

namespace adrl {

namespace fs = std::filesystem;

/// Root for run outputs: $ADRL_OUTPUT_ROOT when set, else ./runs.
inline fs::path output_root() {
  const char* env = std::getenv("ADRL_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

struct EvalEpisode {
  double ret = 0.0;
  int steps = 0;
  double time = 0.0;
  double distance = 0.0;
  bool off_road = false;
};

struct AttentionRow {
  int episode = 0;
  int step = 0;
  Vector p;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size()))};
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw ShapeError("median of an empty sample");
  std::sort(xs.begin(), xs.end());
  const auto n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct EvalResult {
  std::vector<EvalEpisode> episodes;
  std::vector<AttentionRow> attention;

  std::vector<double> field(double EvalEpisode::*m) const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.*m);
    return out;
  }
  MeanStd returns() const { return mean_std(field(&EvalEpisode::ret)); }
  MeanStd times() const { return mean_std(field(&EvalEpisode::time)); }
  MeanStd distances() const { return mean_std(field(&EvalEpisode::distance)); }

  /// Per-view mean attention weight over all logged steps.
  Vector mean_attention() const {
    if (attention.empty()) throw ConfigError("no attention rows logged");
    Vector m = Vector::Zero(attention.front().p.size());
    for (const auto& r : attention) m += r.p;
    return m / static_cast<double>(attention.size());
  }
};

using Policy = std::function<Vector(const std::vector<Vector>&, Vector* attention)>;

/// Greedy rollouts (no exploration noise) on episode seeds derived from `seed`.
inline EvalResult evaluate_policy(const Policy& policy, MultiViewEnv& env, int episodes, std::uint64_t seed,
                                  bool log_attention) {
  EvalResult out;
  for (int k = 0; k < episodes; ++k) {
    StepResult cur = env.reset(derive_seed(seed, "eval", static_cast<std::uint64_t>(k)));
    EvalEpisode ep;
    while (!cur.terminal) {
      Vector p;
      const Vector a = policy(cur.observations, log_attention ? &p : nullptr);
      if (log_attention && p.size() > 0) out.attention.push_back({k, cur.steps, p});
      cur = env.step(a);
      ep.ret += cur.reward;
    }
    ep.steps = cur.steps;
    ep.time = cur.time;
    ep.distance = cur.distance;
    ep.off_road = cur.off_road;
    out.episodes.push_back(ep);
  }
  return out;
}

inline void apply_test_protocol(MultiViewEnv& env, const NoiseProtocol& n) {
  if (n.perturb_view) env.perturb_view(*n.perturb_view, n.perturb_sigma2);
  if (!n.irrelevant_views.empty()) env.make_irrelevant(n.irrelevant_views);
}

/// One trainable agent of any method.
class Model {
 public:
  Model(const ExperimentConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    switch (cfg.method) {
      case Method::adrl: coordinator_ = std::make_unique<Coordinator>(cfg.env, cfg.agent, seed); break;
      case Method::act_avg:
      case Method::act_cnt:
      case Method::act_mjv: {
        AdrlConfig a = cfg.agent;
        a.stage2 = false;
        a.gamma_r = 0.0;
        coordinator_ = std::make_unique<Coordinator>(cfg.env, a, seed);
        break;
      }
      case Method::ddpg: ddpg_ = std::make_unique<DdpgAgent>(cfg.env, cfg.agent, seed, cfg.ddpg_view); break;
      case Method::ft_comb: concat_ = std::make_unique<ConcatAgent>(cfg.env, cfg.agent, seed); break;
    }
  }

  Method method() const { return cfg_.method; }
  Coordinator* coordinator() { return coordinator_.get(); }
  const Coordinator* coordinator() const { return coordinator_.get(); }
  DdpgAgent* ddpg() { return ddpg_.get(); }

  bool has_attention() const { return cfg_.method == Method::adrl && !coordinator_->single_view(); }

  void train(const Coordinator::EpisodeCallback& on_episode, const Coordinator::IterationCallback& on_iteration) {
    if (coordinator_) coordinator_->train(on_episode, on_iteration);
    else if (ddpg_) ddpg_->train(on_episode, on_iteration);
    else concat_->train(on_episode, on_iteration);
  }

  Vector act(const std::vector<Vector>& obs, Vector* attention) const {
    switch (cfg_.method) {
      case Method::adrl: {
        if (!attention) return coordinator_->act(obs);
        AttentionStep step;
        Vector a = coordinator_->act(obs, &step);
        *attention = step.p;
        return a;
      }
      case Method::act_avg: return ensemble_action(*coordinator_, obs, Combiner::average);
      case Method::act_cnt: return ensemble_action(*coordinator_, obs, Combiner::centroid);
      case Method::act_mjv: return ensemble_action(*coordinator_, obs, Combiner::majority);
      case Method::ddpg: return ddpg_->act(obs);
      case Method::ft_comb: return concat_->act(obs);
    }
    throw std::logic_error("unknown method");
  }

  void adapt(MultiViewEnv& env, long steps) {
    if (cfg_.method == Method::adrl) coordinator_->adapt(env, steps, seed_);
  }

  void save(const fs::path& dir) const {
    if (coordinator_) coordinator_->save(dir);
    else if (ddpg_) ddpg_->save(dir);
    else concat_->save(dir);
  }

  void load(const fs::path& dir) {
    if (coordinator_) coordinator_->load(dir);
    else if (ddpg_) ddpg_->load(dir);
    else concat_->load(dir);
  }

 private:
  ExperimentConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<Coordinator> coordinator_;
  std::unique_ptr<DdpgAgent> ddpg_;
  std::unique_ptr<ConcatAgent> concat_;
};

/// Evaluation on a fresh environment with the test-time protocol applied
/// (after `noise.adaptation_steps` of joint training on it for ADRL).
inline EvalResult evaluate(Model& model, const ExperimentConfig& cfg, std::uint64_t seed) {
  MultiViewEnv env(cfg.env);
  apply_test_protocol(env, cfg.noise);
  if (cfg.noise.adaptation_steps > 0) model.adapt(env, cfg.noise.adaptation_steps);
  const bool att = model.has_attention();
  return evaluate_policy([&](const std::vector<Vector>& obs, Vector* p) { return model.act(obs, p); }, env,
                         cfg.eval_episodes, seed, att);
}

// ---- CSV schemas ----------------------------------------------------------

inline constexpr int kEpisodesSchema = 1;
inline constexpr int kEvaluationSchema = 1;
inline constexpr int kAttentionSchema = 1;

inline std::vector<std::string> episode_header(int views) {
  std::vector<std::string> h{"iteration", "stage", "episode", "worker",   "return",         "shaped_return",
                             "steps",     "time",  "distance", "off_road", "mean_deviation", "eps_global"};
  for (int w = 0; w < views; ++w) h.push_back("eps_" + std::to_string(w));
  for (int w = 0; w < views; ++w) h.push_back("att_" + std::to_string(w));
  return h;
}

inline std::vector<std::string> episode_row(const EpisodeStats& s, int views) {
  using csv::format;
  std::vector<std::string> r{std::to_string(s.iteration),
                             std::to_string(s.stage),
                             std::to_string(s.episode),
                             s.worker == kGlobalWorker ? "global" : std::to_string(s.worker),
                             format(s.ret),
                             format(s.shaped_ret),
                             std::to_string(s.steps),
                             format(s.time),
                             format(s.distance),
                             s.off_road ? "1" : "0",
                             format(s.mean_deviation),
                             format(s.global_epsilon)};
  for (int w = 0; w < views; ++w) r.push_back(format(w < s.epsilons.size() ? s.epsilons[w] : s.global_epsilon));
  for (int w = 0; w < views; ++w) r.push_back(s.attention_mean.size() > w ? format(s.attention_mean[w]) : "nan");
  return r;
}

inline std::vector<std::string> attention_header(int views) {
  std::vector<std::string> h{"episode", "step"};
  for (int w = 0; w < views; ++w) h.push_back("att_" + std::to_string(w));
  return h;
}

inline std::ofstream open_output(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

inline void write_evaluation(const fs::path& dir, const EvalResult& r, int views) {
  fs::create_directories(dir);
  {
    std::ofstream os = open_output(dir / "evaluation.csv");
    csv::Writer w(os, "evaluation", kEvaluationSchema, {"episode", "return", "steps", "time", "distance", "off_road"});
    for (std::size_t k = 0; k < r.episodes.size(); ++k) {
      const auto& e = r.episodes[k];
      w.write({std::to_string(k), csv::format(e.ret), std::to_string(e.steps), csv::format(e.time),
               csv::format(e.distance), e.off_road ? "1" : "0"});
    }
  }
  if (!r.attention.empty()) {
    std::ofstream os = open_output(dir / "eval_attention.csv");
    csv::Writer w(os, "attention", kAttentionSchema, attention_header(views));
    for (const auto& row : r.attention) {
      std::vector<std::string> cells{std::to_string(row.episode), std::to_string(row.step)};
      for (Eigen::Index i = 0; i < row.p.size(); ++i) cells.push_back(csv::format(row.p[i]));
      w.write(cells);
    }
  }
  const auto ret = r.returns(), time = r.times(), dist = r.distances();
  Json summary = {{"episodes", r.episodes.size()},
                  {"return_mean", ret.mean},
                  {"return_std", ret.std},
                  {"time_mean", time.mean},
                  {"time_std", time.std},
                  {"distance_mean", dist.mean},
                  {"distance_std", dist.std}};
  open_output(dir / "summary.json") << summary.dump(2) << "\n";
}

struct RunRecord {
  std::string name;
  Method method = Method::adrl;
  std::uint64_t seed = 0;
  std::vector<EpisodeStats> episodes;  // per-step attention dropped
  EvalResult eval;
  fs::path dir;  // empty when nothing was written
};

inline fs::path seed_dir(const fs::path& root, const ExperimentConfig& cfg, std::uint64_t seed) {
  return root / cfg.name / ("seed_" + std::to_string(seed));
}

/// Trains one seed. With a non-empty `dir`, writes config, episode log and checkpoints there.
inline std::vector<EpisodeStats> train_model(Model& model, const ExperimentConfig& cfg, const fs::path& dir) {
  std::vector<EpisodeStats> log;
  std::unique_ptr<std::ofstream> os;
  std::unique_ptr<csv::Writer> writer;
  const int views = cfg.env.num_views;
  if (!dir.empty()) {
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << config_to_json(cfg).dump(2) << "\n";
    os = std::make_unique<std::ofstream>(dir / "episodes.csv");
    writer = std::make_unique<csv::Writer>(*os, "episodes", kEpisodesSchema, episode_header(views));
  }
  model.train(
      [&](const EpisodeStats& s) {
        if (writer) writer->write(episode_row(s, views));
        log.push_back(s);
        log.back().attention.clear();
        log.back().attention.shrink_to_fit();
      },
      [&](int iteration) {
        if (dir.empty() || !cfg.checkpoints) return;
        std::ostringstream name;
        name << "iter_" << std::setw(4) << std::setfill('0') << iteration;
        model.save(dir / "checkpoints" / name.str());
      });
  if (!dir.empty()) model.save(dir / "model");
  return log;
}

inline RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& root) {
  RunRecord rec;
  rec.name = cfg.name;
  rec.method = cfg.method;
  rec.seed = seed;
  if (!root.empty()) rec.dir = seed_dir(root, cfg, seed);
  Model model(cfg, seed);
  rec.episodes = train_model(model, cfg, rec.dir);
  rec.eval = evaluate(model, cfg, seed);
  if (!rec.dir.empty()) write_evaluation(rec.dir, rec.eval, cfg.env.num_views);
  return rec;
}

/// Every configured seed; `root` empty keeps everything in memory.
inline std::vector<RunRecord> run(const ExperimentConfig& cfg, const fs::path& root) {
  std::vector<RunRecord> out;
  for (auto seed : cfg.seeds) out.push_back(run_seed(cfg, seed, root));
  return out;
}

// ---- comparison -------------------------------------------------------------

struct ComparisonRow {
  std::string name;
  MeanStd time;
  MeanStd distance;
  std::vector<double> seed_time;      // per-seed mean normalized time
  std::vector<double> seed_distance;  // per-seed mean normalized distance
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  double time_divisor = 0.0;
  double distance_divisor = 0.0;
};

/// `groups[i]` holds the evaluation results (one per seed) of configuration `names[i]`.
/// Time and distance are divided by their maxima over every evaluation episode in the set.
inline Comparison compare(const std::vector<std::string>& names, const std::vector<std::vector<EvalResult>>& groups) {
  if (names.size() != groups.size()) throw ShapeError("compare: one name per group");
  if (groups.size() < 2) throw ConfigError("compare: need at least two configurations");
  Comparison c;
  for (const auto& g : groups)
    for (const auto& r : g)
      for (const auto& e : r.episodes) {
        c.time_divisor = std::max(c.time_divisor, e.time);
        c.distance_divisor = std::max(c.distance_divisor, e.distance);
      }
  const auto norm = [](double v, double d) { return d > 0.0 ? v / d : 0.0; };
  for (std::size_t i = 0; i < groups.size(); ++i) {
    ComparisonRow row;
    row.name = names[i];
    std::vector<double> t, d;
    for (const auto& r : groups[i]) {
      std::vector<double> st, sd;
      for (const auto& e : r.episodes) {
        st.push_back(norm(e.time, c.time_divisor));
        sd.push_back(norm(e.distance, c.distance_divisor));
      }
      t.insert(t.end(), st.begin(), st.end());
      d.insert(d.end(), sd.begin(), sd.end());
      row.seed_time.push_back(mean_std(st).mean);
      row.seed_distance.push_back(mean_std(sd).mean);
    }
    row.time = mean_std(t);
    row.distance = mean_std(d);
    c.rows.push_back(std::move(row));
  }
  return c;
}

inline void write_comparison(std::ostream& os, const Comparison& c) {
  csv::Writer w(os, "comparison", 1, {"method", "time_mean", "time_std", "distance_mean", "distance_std"});
  for (const auto& r : c.rows)
    w.write({r.name, csv::format(r.time.mean), csv::format(r.time.std), csv::format(r.distance.mean),
             csv::format(r.distance.std)});
}

inline EvalResult read_evaluation(const fs::path& dir) {
  const auto t = csv::read((dir / "evaluation.csv").string());
  EvalResult r;
  const auto ret = t.numbers("return"), steps = t.numbers("steps"), time = t.numbers("time"),
             dist = t.numbers("distance"), off = t.numbers("off_road");
  for (std::size_t k = 0; k < t.rows.size(); ++k)
    r.episodes.push_back({ret[k], static_cast<int>(steps[k]), time[k], dist[k], off[k] != 0.0});
  return r;
}

/// Training curves: mean and std of the episode return across seeds, per episode index.
inline void write_curves(std::ostream& os, const std::vector<std::string>& names,
                         const std::vector<std::vector<csv::Table>>& logs) {
  csv::Writer w(os, "curves", 1, {"method", "episode", "return_mean", "return_std", "seeds"});
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::vector<double>> returns;
    for (const auto& t : logs[i]) returns.push_back(t.numbers("return"));
    std::size_t n = 0;
    for (const auto& r : returns) n = std::max(n, r.size());
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<double> xs;
      for (const auto& r : returns)
        if (e < r.size()) xs.push_back(r[e]);
      const auto ms = mean_std(xs);
      w.write({names[i], std::to_string(e), csv::format(ms.mean), csv::format(ms.std), std::to_string(xs.size())});
    }
  }
}

/// Reads every seed_* directory of each configuration directory and writes
/// comparison.csv and curves.csv into `out`. Configurations must share an environment.
inline Comparison compare_runs(const std::vector<fs::path>& config_dirs, const fs::path& out) {
  std::vector<std::string> names;
  std::vector<std::vector<EvalResult>> evals;
  std::vector<std::vector<csv::Table>> logs;
  std::optional<ExperimentConfig> first;
  for (const auto& dir : config_dirs) {
    std::vector<fs::path> seeds;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) seeds.push_back(entry.path());
    std::sort(seeds.begin(), seeds.end());
    if (seeds.empty()) throw ConfigError("compare: no seed_* directories in " + dir.string());
    const ExperimentConfig cfg = load_config((seeds.front() / "config.json").string());
    if (!first) first = cfg;
    else if (!same_env(*first, cfg)) throw ConfigError("compare: " + dir.string() + " uses a different environment");
    names.push_back(cfg.name);
    evals.emplace_back();
    logs.emplace_back();
    for (const auto& s : seeds) {
      evals.back().push_back(read_evaluation(s));
      logs.back().push_back(csv::read((s / "episodes.csv").string()));
    }
  }
  Comparison c = compare(names, evals);
  fs::create_directories(out);
  std::ofstream table(out / "comparison.csv");
  write_comparison(table, c);
  std::ofstream curves(out / "curves.csv");
  write_curves(curves, names, logs);
  return c;
}

// ---- attention report -------------------------------------------------------

struct ViewAttention {
  int view = 0;
  MeanStd weight;
  bool below_uniform = false;
};

struct AttentionReport {
  std::vector<ViewAttention> views;
  double max_row_sum_error = 0.0;  // max |sum_w p_w - 1| over rows
  std::size_t rows = 0;
};

/// Per-view mean/std of the att_<w> columns; flags views whose mean is below 1/N_w.
inline AttentionReport attention_report(const csv::Table& t) {
  std::vector<std::size_t> cols;
  for (int w = 0;; ++w) {
    const std::string name = "att_" + std::to_string(w);
    if (!t.has_column(name)) break;
    cols.push_back(t.column(name));
  }
  if (cols.empty()) throw ConfigError("attention report: no att_<w> columns");
  AttentionReport rep;
  std::vector<std::vector<double>> per(cols.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double sum = 0.0;
    bool any_nan = false;
    for (std::size_t w = 0; w < cols.size(); ++w) {
      const double v = t.number(r, cols[w]);
      if (std::isnan(v)) any_nan = true;
      sum += v;
    }
    if (any_nan) continue;  // stage-1 rows of an episode log carry no weights
    for (std::size_t w = 0; w < cols.size(); ++w) per[w].push_back(t.number(r, cols[w]));
    rep.max_row_sum_error = std::max(rep.max_row_sum_error, std::abs(sum - 1.0));
    ++rep.rows;
  }
  if (rep.rows == 0) throw ConfigError("attention report: no rows with attention weights");
  const double uniform = 1.0 / static_cast<double>(cols.size());
  for (std::size_t w = 0; w < cols.size(); ++w) {
    ViewAttention v;
    v.view = static_cast<int>(w);
    v.weight = mean_std(per[w]);
    v.below_uniform = v.weight.mean < uniform;
    rep.views.push_back(v);
  }
  return rep;
}

inline void write_attention_report(std::ostream& os, const AttentionReport& r) {
  csv::Writer w(os, "attention-report", 1, {"view", "mean", "std", "below_uniform"});
  for (const auto& v : r.views)
    w.write({std::to_string(v.view), csv::format(v.weight.mean), csv::format(v.weight.std), v.below_uniform ? "1" : "0"});
}

}  // namespace adrl
