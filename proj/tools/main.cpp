#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "acss/harness.hpp"
#include "selftest.hpp"

using namespace acss;

namespace {

int default_threads() {
  if (const char* env = std::getenv("ACSS_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring invalid ACSS_THREADS='" << env << "'\n";
  }
  return 1;
}

int cmd_run(ExperimentConfig cfg, bool check, bool quiet) {
  const auto progress = [quiet](std::size_t done, std::size_t total) {
    if (quiet) return;
    if (done == total || done % 10 == 0) std::cerr << "\r" << done << "/" << total << std::flush;
    if (done == total) std::cerr << '\n';
  };
  const auto records = run_experiment(cfg, progress);
  if (cfg.out_path.empty()) {
    write_csv(std::cout, records);
  } else {
    std::ofstream out(cfg.out_path);
    if (!out) throw std::runtime_error("cannot write '" + cfg.out_path + "'");
    write_csv(out, records);
  }
  const auto rows = summarize(records, cfg.alpha);
  write_power_table(cfg.out_path.empty() ? std::cerr : std::cout, rows);
  if (!check) return 0;
  // Null calibration: aCSS rejection rate at the smallest signal within 0.05 +- 3 SE.
  bool ok = true;
  for (const auto& r : rows)
    if (r.method == "acss" && r.signal == cfg.signals.front()) {
      const double se = std::sqrt(cfg.alpha * (1 - cfg.alpha) / r.reps);
      ok = r.rate <= cfg.alpha + 3 * se;
      std::cerr << (ok ? "PASS" : "FAIL") << " null rejection rate " << r.rate << " <= "
                << cfg.alpha + 3 * se << '\n';
    }
  return ok ? 0 : 1;
}

int cmd_tune(const ExperimentConfig& cfg) {
  const Experiment exp(cfg);
  Rng rng(derive_seed(cfg.seed, {0xfeed}));
  Rng data_rng = rng.split();
  const Replication r = exp.generate(0, data_rng);
  const AcssConfig acfg = exp.acss_config();
  const NoiseVector w = draw_noise(r.model->dim(), rng);
  const SsospEstimate est = solve_perturbed(*r.model, zero_regularizer(), r.x, w, acfg);
  std::cout << "theta_hat = " << est.theta_hat.transpose() << "  ssosp = " << est.is_ssosp
            << "  iterations = " << est.iterations << '\n';
  if (!est.is_ssosp) {
    std::cout << "estimate is not an SSOSP (" << est.diagnostic << "); nothing to tune\n";
    return 0;
  }
  const TuningResult t = tune_proposal(*r.model, zero_regularizer(), est.theta_hat, acfg, r.x.n(),
                                       rng, cfg.subset_tuning_reps, cfg.rho_tuning_reps);
  const bool ar = t.proposal.family == ProposalFamily::ArMixing;
  std::cout << (ar ? "rho" : "s") << "\tacceptance" << (ar ? "\tcorrelation" : "") << '\n';
  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    std::cout << t.candidates[i] << '\t' << t.acceptance[i];
    if (ar) std::cout << '\t' << t.correlation[i];
    std::cout << '\n';
  }
  std::cout << "chosen " << (ar ? "rho = " + std::to_string(t.proposal.rho)
                                : "s = " + std::to_string(t.proposal.s))
            << "  L = " << t.proposal.L << "  simulations used = " << t.sims_used
            << (t.flagged ? "  (no candidate met the acceptance floor)" : "") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate co-sufficient sampling goodness-of-fit tests"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_path;
  bool check = false, quiet = false;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo power study");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seed, "Root seed (overrides the config)");
  run->add_option("--threads", threads, "Worker threads (default: ACSS_THREADS or 1)");
  run->add_option("--out", out_path, "CSV output path (default: config 'out' or stdout)");
  run->add_flag("--check", check, "Exit 1 if the null rejection rate exceeds alpha + 3 SE");
  run->add_flag("--quiet", quiet, "No progress output");

  auto* tune = app.add_subcommand("tune", "Show proposal tuning on one null dataset");
  tune->add_option("--config", config_path, "Experiment config file")->required();
  tune->add_option("--seed", seed, "Root seed (overrides the config)");

  app.add_subcommand("selftest", "Run the quick property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("selftest")) return run_selftest(std::cout) == 0 ? 0 : 1;
    ExperimentConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    cfg.threads = threads.value_or(cfg.threads > 1 ? cfg.threads : default_threads());
    if (!out_path.empty()) cfg.out_path = out_path;
    cfg.validate();
    if (app.got_subcommand("run")) return cmd_run(cfg, check, quiet);
    return cmd_tune(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
