#pragma once

#include <optional>
#include <span>
#include <vector>

#include "acss/samplers.hpp"
#include "acss/statistics.hpp"

namespace acss {

struct AcssResult {
  double pvalue = 1.0;
  double t_observed = NAN;
  std::vector<double> t_copies;
  bool ssosp_ok = false;
  ParamVector theta_hat;
  SsospEstimate estimate;
  std::optional<TuningResult> tuning;
  double acceptance_rate = NAN;
  double wall_ms = 0.0;
};

struct RunOptions {
  int m = 100;
  Topology topology = Topology::HubAndSpoke;
  /// Fixed proposal; when empty the proposal is tuned from theta-hat.
  std::optional<ProposalConfig> proposal;
  int subset_tuning_reps = 100;
  int rho_tuning_reps = 500;
};

/// (1 + #{m : t_copies[m] >= t_obs}) / (M + 1).
double compute_pvalue(double t_obs, std::span<const double> t_copies);

/// Perturbed estimate, then (if it is an SSOSP) copies drawn given theta-hat
/// and the rank p-value of T. Returns p = 1 when the estimate is not an SSOSP.
AcssResult run_acss(const Model& model, const Regularizer& reg, const Dataset& x,
                    const TestStatistic& statistic, const AcssConfig& cfg, const RunOptions& opts,
                    Rng& rng);

/// M independent draws from P_theta0 (the simple null known to an oracle).
CopySet oracle_copies(const Model& model, const ParamVector& theta0, int m, Rng& rng);

double oracle_pvalue(const Model& model, const ParamVector& theta0, const Dataset& x,
                     const TestStatistic& statistic, int m, Rng& rng);

}  // namespace acss
