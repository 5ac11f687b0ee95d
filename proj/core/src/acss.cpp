#include "acss/acss.hpp"

#include <chrono>

namespace acss {

double compute_pvalue(double t_obs, std::span<const double> t_copies) {
  std::size_t count = 1;
  for (double t : t_copies)
    if (t >= t_obs) ++count;
  return static_cast<double>(count) / static_cast<double>(t_copies.size() + 1);
}

AcssResult run_acss(const Model& model, const Regularizer& reg, const Dataset& x,
                    const TestStatistic& statistic, const AcssConfig& cfg, const RunOptions& opts,
                    Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  if (!(cfg.sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (opts.m < 0) throw ConfigError("M must be >= 0");
  model.check_data(x);

  Rng noise_rng = rng.split();
  Rng tune_rng = rng.split();
  Rng sample_rng = rng.split();

  AcssResult out;
  out.t_observed = statistic.evaluate(x);
  const NoiseVector w = draw_noise(model.dim(), noise_rng);
  out.estimate = solve_perturbed(model, reg, x, w, cfg);
  out.theta_hat = out.estimate.theta_hat;
  out.ssosp_ok = out.estimate.is_ssosp;

  if (out.ssosp_ok) {
    const CondDensityContext ctx(model, reg, out.theta_hat, cfg);
    ProposalConfig prop;
    if (opts.topology != Topology::Iid) {
      if (opts.proposal) {
        prop = *opts.proposal;
      } else {
        out.tuning = tune_proposal(model, reg, out.theta_hat, cfg, x.n(), tune_rng,
                                   opts.subset_tuning_reps, opts.rho_tuning_reps);
        prop = out.tuning->proposal;
      }
    }
    CopySet copies = sample_copies(ctx, prop, opts.topology, x, opts.m, sample_rng);
    out.acceptance_rate = copies.acceptance_rate;
    out.t_copies.reserve(copies.copies.size());
    for (const auto& c : copies.copies) out.t_copies.push_back(statistic.evaluate(c));
    out.pvalue = compute_pvalue(out.t_observed, out.t_copies);
  }
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

CopySet oracle_copies(const Model& model, const ParamVector& theta0, int m, Rng& rng) {
  CopySet out;
  out.topology = Topology::Iid;
  if (m <= 0) return out;
  const auto truth = model.bind(theta0);
  out.copies.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out.copies.push_back(truth->sample(rng));
  out.acceptance_rate = 1.0;
  return out;
}

double oracle_pvalue(const Model& model, const ParamVector& theta0, const Dataset& x,
                     const TestStatistic& statistic, int m, Rng& rng) {
  const CopySet copies = oracle_copies(model, theta0, m, rng);
  std::vector<double> t;
  t.reserve(copies.copies.size());
  for (const auto& c : copies.copies) t.push_back(statistic.evaluate(c));
  return compute_pvalue(statistic.evaluate(x), t);
}

}  // namespace acss
