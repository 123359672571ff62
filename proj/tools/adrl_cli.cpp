// adrl-cli: train | evaluate | compare | attention-report

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adrl/harness/experiment.hpp"

namespace {

using adrl::Json;

/// Flags mirror configuration fields; only flags given on the command line land in the JSON.
struct ConfigFlags {
  std::string config_path;
  std::string name, method;
  std::vector<std::uint64_t> seeds;
  int iterations = 0, episodes = 0, views = 0, eval_episodes = 0;
  double gamma_r = 0.0, env_sigma2 = 0.0, perturb_sigma2 = 0.0;
  long max_train_steps = 0, adaptation_steps = 0;
  int perturb_view = -1;
  std::vector<int> irrelevant;
  bool no_checkpoints = false;

  void add(CLI::App& app) {
    app.add_option("--config", config_path, "JSON configuration (its fields override flags)");
    app.add_option("--name", name, "Run name (output subdirectory)");
    app.add_option("--method", method, "ADRL, DDPG, ACT-AVG, ACT-CNT, ACT-MJV or FT-COMB");
    app.add_option("--seeds", seeds, "Master seeds");
    app.add_option("--iterations", iterations, "M, training iterations");
    app.add_option("--episodes", episodes, "E, episodes per iteration");
    app.add_option("--views", views, "N_w, number of views");
    app.add_option("--eval-episodes", eval_episodes, "Evaluation episodes per seed");
    app.add_option("--gamma-r", gamma_r, "Deviation penalty weight");
    app.add_option("--max-train-steps", max_train_steps, "Environment step budget (0: none)");
    app.add_option("--env-sigma2", env_sigma2, "Observation noise variance on every view");
    app.add_option("--perturb-view", perturb_view, "View perturbed at test time");
    app.add_option("--perturb-sigma2", perturb_sigma2, "Test-time variance of the perturbed view");
    app.add_option("--irrelevant", irrelevant, "Views replaced by pure noise at test time");
    app.add_option("--adaptation-steps", adaptation_steps, "Joint-training steps on the test env (ADRL)");
    app.add_flag("--no-checkpoints", no_checkpoints, "Skip per-iteration checkpoints");
  }

  Json to_json(const CLI::App& app) const {
    Json j = Json::object();
    auto given = [&](const char* flag) { return app.count(flag) > 0; };
    if (given("--name")) j["name"] = name;
    if (given("--method")) j["method"] = method;
    if (given("--seeds")) j["seeds"] = seeds;
    if (given("--iterations")) j["schedule"]["iterations"] = iterations;
    if (given("--episodes")) j["schedule"]["episodes_per_iteration"] = episodes;
    if (given("--views")) j["env"]["num_views"] = views;
    if (given("--eval-episodes")) j["eval_episodes"] = eval_episodes;
    if (given("--gamma-r")) j["gamma_r"] = gamma_r;
    if (given("--max-train-steps")) j["max_train_steps"] = max_train_steps;
    if (given("--env-sigma2")) j["noise"]["env_sigma2"] = env_sigma2;
    if (given("--perturb-view")) j["noise"]["perturb_view"] = perturb_view;
    if (given("--perturb-sigma2")) j["noise"]["perturb_sigma2"] = perturb_sigma2;
    if (given("--irrelevant")) j["noise"]["irrelevant_views"] = irrelevant;
    if (given("--adaptation-steps")) j["noise"]["adaptation_steps"] = adaptation_steps;
    if (no_checkpoints) j["checkpoints"] = false;
    return j;
  }

  adrl::ExperimentConfig resolve(const CLI::App& app, Json base = Json::object()) const {
    base.merge_patch(to_json(app));
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw adrl::ConfigError("cannot open config " + config_path);
      base.merge_patch(Json::parse(is));
    }
    return adrl::config_from_json(base);
  }
};

void print_summary(const adrl::RunRecord& r) {
  const auto ret = r.eval.returns(), t = r.eval.times(), d = r.eval.distances();
  std::cout << r.name << " seed " << r.seed << ": return " << ret.mean << " +- " << ret.std << ", time " << t.mean
            << ", distance " << d.mean << "  (" << r.episodes.size() << " training episodes)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based multi-view actor-critic experiments"};
  app.require_subcommand(1);
  std::string output;

  auto* train = app.add_subcommand("train", "Train every seed of a configuration and evaluate it");
  ConfigFlags train_flags;
  train_flags.add(*train);
  train->add_option("--output", output, "Output root (default $ADRL_OUTPUT_ROOT or ./runs)");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained seed directory under a test protocol");
  ConfigFlags eval_flags;
  eval_flags.add(*evaluate);
  std::string run_dir, eval_out;
  evaluate->add_option("--run", run_dir, "seed_<s> directory written by train")->required();
  evaluate->add_option("--out", eval_out, "Output directory (default <run>/evaluate)");

  auto* compare = app.add_subcommand("compare", "Normalized comparison table and training curves");
  std::vector<std::string> compare_dirs;
  std::string compare_out;
  compare->add_option("runs", compare_dirs, "Configuration directories (each holding seed_* runs)")->required();
  compare->add_option("--out", compare_out, "Output directory")->required();

  auto* report = app.add_subcommand("attention-report", "Per-view attention weight summary");
  std::string report_csv;
  report->add_option("csv", report_csv, "eval_attention.csv or episodes.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto cfg = train_flags.resolve(*train);
      const adrl::fs::path root = output.empty() ? adrl::output_root() : adrl::fs::path(output);
      for (auto seed : cfg.seeds) print_summary(adrl::run_seed(cfg, seed, root));
    } else if (*evaluate) {
      const adrl::fs::path dir(run_dir);
      std::ifstream is(dir / "config.json");
      if (!is) throw adrl::ConfigError("no config.json in " + run_dir);
      Json base = Json::parse(is);
      base.erase("noise");  // the test protocol comes from the flags / --config
      const auto cfg = eval_flags.resolve(*evaluate, base);
      const std::string seed_name = dir.filename().string();
      const std::uint64_t seed = std::stoull(seed_name.substr(seed_name.find('_') + 1));
      adrl::Model model(cfg, seed);
      model.load(dir / "model");
      const auto result = adrl::evaluate(model, cfg, seed);
      const adrl::fs::path out = eval_out.empty() ? dir / "evaluate" : adrl::fs::path(eval_out);
      adrl::fs::create_directories(out);
      adrl::write_evaluation(out, result, cfg.env.num_views);
      const auto ret = result.returns();
      std::cout << "return " << ret.mean << " +- " << ret.std << ", time " << result.times().mean << ", distance "
                << result.distances().mean << "\n";
    } else if (*compare) {
      std::vector<adrl::fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      const auto c = adrl::compare_runs(dirs, compare_out);
      adrl::write_comparison(std::cout, c);
    } else if (*report) {
      const auto rep = adrl::attention_report(adrl::csv::read(report_csv));
      adrl::write_attention_report(std::cout, rep);
      for (const auto& v : rep.views)
        if (v.below_uniform) std::cerr << "view " << v.view << " is weighted below uniform\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
