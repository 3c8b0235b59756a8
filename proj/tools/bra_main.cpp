// Command-line driver: simulate | fit | assess | mcda | sequential.
// Every command is a pure function of (input files, config, seed); outputs are
// removed if a command fails partway.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include "bra/assess.hpp"
#include "bra/config.hpp"
#include "bra/dataset.hpp"
#include "bra/fit.hpp"
#include "bra/mcda.hpp"
#include "bra/simulate.hpp"
#include "bra/smc.hpp"

namespace fs = std::filesystem;
using namespace bra;

namespace {

struct OutputGuard {
  std::vector<fs::path> written;
  bool committed = false;

  std::string track(const fs::path& p) {
    written.push_back(p);
    return p.string();
  }
  ~OutputGuard() {
    if (committed) return;
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("BRA_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::vector<std::string> models;
  std::uint64_t seed = 0;
  int workers = 0;
  double threshold = -1.0;
};

RunConfig make_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? default_config() : load_config(args.config_path);
  if (!args.models.empty()) {
    cfg.models.clear();
    for (const auto& name : args.models) cfg.models.push_back(parse_model_name(name));
  }
  if (args.threshold >= 0.0) cfg.mcda.crossing_threshold = args.threshold;
  int workers = resolve_workers(args.workers);
  cfg.assess.workers = workers;
  cfg.smc.workers = workers;
  cfg.fit.seed = args.seed;
  cfg.assess.seed = args.seed;
  cfg.assess.fit.seed = args.seed;
  cfg.smc.seed = args.seed;
  if (!args.data_path.empty()) cfg.dataset_path = args.data_path;
  return cfg;
}

Dataset load_input(const RunConfig& cfg) {
  if (cfg.dataset_path.empty())
    throw std::runtime_error("no dataset: pass --data or set \"dataset\" in the config");
  return load_dataset(cfg.dataset_path, cfg.schema);
}

int cmd_simulate(const CommonArgs& args) {
  RunConfig cfg = make_config(args);
  int total = 0;
  for (int c : cfg.simulate_counts) total += c;
  if (total <= 0) throw std::runtime_error("simulate: group counts must be positive");
  ModelSpec spec = cfg.truth_spec();
  auto d = simulate_dataset(spec, cfg.truth, cfg.schema, cfg.simulate_counts, args.seed);

  OutputGuard guard;
  fs::create_directories(args.out_dir);
  write_dataset(d, guard.track(fs::path(args.out_dir) / "dataset.csv"));
  std::ofstream truth(guard.track(fs::path(args.out_dir) / "truth.json"));
  truth << truth_to_json(cfg.truth, spec, cfg.schema) << '\n';
  if (!truth) throw std::runtime_error("simulate: cannot write truth.json");
  truth.close();
  guard.committed = true;
  std::printf("simulate: %d subjects, %d groups -> %s\n", d.n(), cfg.schema.n_groups(),
              args.out_dir.c_str());
  return 0;
}

int cmd_fit(const CommonArgs& args) {
  RunConfig cfg = make_config(args);
  Dataset d = load_input(cfg);
  OutputGuard guard;
  fs::create_directories(args.out_dir);
  for (const auto& choice : cfg.models) {
    ModelSpec spec = cfg.spec_for(choice);
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = splitmix64(args.seed) ^ std::hash<std::string>{}(choice.name);
    auto fit = fit_model(d, spec, cfg.prior, fit_cfg);
    write_draws(fit.draws, spec, cfg.schema,
                guard.track(fs::path(args.out_dir) / ("draws_" + choice.name + ".csv")));
    write_summary(fit.draws, spec, cfg.schema,
                  guard.track(fs::path(args.out_dir) / ("summary_" + choice.name + ".csv")));
    std::printf("fit %s: %zu draws, accept %.2f, divergences %lld\n", choice.name.c_str(),
                fit.draws.size(), fit.accept_rate, fit.divergences);
  }
  guard.committed = true;
  return 0;
}

int cmd_assess(const CommonArgs& args) {
  RunConfig cfg = make_config(args);
  Dataset d = load_input(cfg);
  OutputGuard guard;
  fs::create_directories(args.out_dir);
  std::vector<AssessmentReport> reports;
  for (const auto& choice : cfg.models) {
    AssessConfig acfg = cfg.assess;
    acfg.seed = splitmix64(args.seed) ^ std::hash<std::string>{}(choice.name);
    reports.push_back(assess_model(d, cfg.spec_for(choice), cfg.prior, acfg));
    const auto& r = reports.back();
    std::printf("assess %s: LS cont %.2f bin %.2f comb %.2f | PPP cont %.3f bin %.3f\n",
                r.model.c_str(), r.ls_continuous, r.ls_binary, r.ls_combined, r.ppp_continuous,
                r.ppp_binary);
  }
  write_assessment(reports, guard.track(fs::path(args.out_dir) / "assessment.csv"));
  guard.committed = true;
  return 0;
}

int cmd_mcda(const CommonArgs& args, const std::string& draws_path, const std::string& model_name) {
  RunConfig cfg = make_config(args);
  ModelChoice choice = parse_model_name(model_name);
  ModelSpec spec = cfg.spec_for(choice);
  auto draws = read_draws(draws_path, spec, cfg.schema);
  auto sp = score_posterior(draws, cfg.mcda, spec);

  OutputGuard guard;
  fs::create_directories(args.out_dir);
  {
    std::ofstream f(guard.track(fs::path(args.out_dir) / ("scores_" + choice.name + ".csv")));
    f << "draw";
    for (int r = 0; r < cfg.schema.n_groups(); ++r) f << ",s_" << cfg.schema.group_label(r);
    f << '\n';
    char buf[64];
    for (int m = 0; m < sp.scores.rows(); ++m) {
      f << (m + 1);
      for (int r = 0; r < sp.scores.cols(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.10g", sp.scores(m, r));
        f << ',' << buf;
      }
      f << '\n';
    }
    if (!f) throw std::runtime_error("mcda: cannot write scores");
  }
  {
    std::ofstream f(guard.track(fs::path(args.out_dir) / ("superiority_" + choice.name + ".csv")));
    f << "group";
    for (int b = 0; b < cfg.schema.n_groups(); ++b) f << ",gt_" << cfg.schema.group_label(b);
    f << '\n';
    char buf[64];
    for (int a = 0; a < cfg.schema.n_groups(); ++a) {
      f << cfg.schema.group_label(a);
      for (int b = 0; b < cfg.schema.n_groups(); ++b) {
        double v = (a == b) ? 0.5 : superiority_prob(sp, a, b);
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        f << ',' << buf;
      }
      f << '\n';
    }
    if (!f) throw std::runtime_error("mcda: cannot write superiority matrix");
  }
  for (int r = 0; r < cfg.schema.n_groups(); ++r)
    std::printf("mcda %s: %s mean %.4f [%.4f, %.4f]\n", choice.name.c_str(),
                cfg.schema.group_label(r).c_str(), sp.mean(r), sp.quantile(r, 0.025),
                sp.quantile(r, 0.975));
  guard.committed = true;
  return 0;
}

int cmd_sequential(const CommonArgs& args, const std::string& model_name) {
  RunConfig cfg = make_config(args);
  Dataset d = load_input(cfg);
  ModelChoice choice = model_name.empty() ? cfg.models[0] : parse_model_name(model_name);
  ModelSpec spec = cfg.spec_for(choice);
  auto schedule = interleave_groups(d, args.seed);
  auto result = run_sequential(d, schedule, spec, cfg.prior, cfg.mcda, cfg.smc);

  OutputGuard guard;
  fs::create_directories(args.out_dir);
  write_trace(result.trace, cfg.schema, guard.track(fs::path(args.out_dir) / "trace.csv"));
  write_crossings(result.trace, cfg.schema,
                  guard.track(fs::path(args.out_dir) / "crossings.csv"));
  {
    auto sp = score_posterior(result.final_draws, cfg.mcda, spec);
    sp.weights = result.system.normalised_weights();
    std::ofstream f(guard.track(fs::path(args.out_dir) / "final_scores.csv"));
    f << "particle,weight";
    for (int r = 0; r < cfg.schema.n_groups(); ++r) f << ",s_" << cfg.schema.group_label(r);
    f << '\n';
    char buf[64];
    for (int m = 0; m < sp.scores.rows(); ++m) {
      f << (m + 1);
      std::snprintf(buf, sizeof(buf), "%.10g", sp.weights[m]);
      f << ',' << buf;
      for (int r = 0; r < sp.scores.cols(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.10g", sp.scores(m, r));
        f << ',' << buf;
      }
      f << '\n';
    }
    if (!f) throw std::runtime_error("sequential: cannot write final scores");
  }
  std::printf("sequential %s: n=%d evidence=%.4f rejuvenations=%d\n", choice.name.c_str(), d.n(),
              result.system.log_evidence, result.system.n_rejuvenations);
  for (const auto& c : result.trace.crossings) {
    std::string when = c.first_index < 0 ? "never" : std::to_string(c.first_index);
    std::printf("  P(%s > %s) >= %.3g first at: %s\n", cfg.schema.group_label(c.group_a).c_str(),
                cfg.schema.group_label(c.group_b).c_str(), result.trace.threshold, when.c_str());
  }
  guard.committed = true;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian benefit-risk analysis: factor models, assessment, MCDA, sequential SMC"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string draws_path, model_name;

  auto add_common = [&](CLI::App* cmd, bool needs_data) {
    cmd->add_option("--config", args.config_path, "JSON config file (built-in default when omitted)");
    cmd->add_option("--seed", args.seed, "random seed")->required();
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--workers", args.workers,
                    "worker threads (default: BRA_WORKERS env or hardware)");
    cmd->add_option("--model", args.models, "model name, repeatable (e.g. EZ1-p SAT IND)");
    cmd->add_option("--threshold", args.threshold, "superiority crossing threshold");
    if (needs_data) cmd->add_option("--data", args.data_path, "dataset CSV");
  };

  auto* simulate = app.add_subcommand("simulate", "draw a synthetic dataset plus truth file");
  add_common(simulate, false);
  auto* fit = app.add_subcommand("fit", "batch posterior fit per model");
  add_common(fit, true);
  auto* assess = app.add_subcommand("assess", "cross-validated log scores and PPP values");
  add_common(assess, true);
  auto* mcda = app.add_subcommand("mcda", "score posterior and superiority matrix from draws");
  add_common(mcda, false);
  mcda->add_option("--draws", draws_path, "posterior draws CSV from fit")->required();
  mcda->add_option("--draws-model", model_name, "model the draws belong to")->required();
  auto* sequential = app.add_subcommand("sequential", "one-subject-at-a-time SMC monitoring run");
  add_common(sequential, true);
  sequential->add_option("--sequential-model", model_name, "model to run (default: first in config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (fit->parsed()) return cmd_fit(args);
    if (assess->parsed()) return cmd_assess(args);
    if (mcda->parsed()) return cmd_mcda(args, draws_path, model_name);
    if (sequential->parsed()) return cmd_sequential(args, model_name);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
