#pragma once

#include <string>
#include <vector>

#include "acss/conditional.hpp"

namespace acss {

struct ProposalConfig {
  ProposalFamily family = ProposalFamily::SubsetResample;
  Eigen::Index s = 1;  // subset size, subset-resample only
  double rho = 0.9;    // mixing weight, ar-mixing only
  int L = 1;           // chain steps between emitted states
};

enum class Topology { Iid, HubAndSpoke, PermutedSerial };

std::string to_string(Topology t);
Topology parse_topology(const std::string& s);

struct CopySet {
  std::vector<Dataset> copies;
  Topology topology = Topology::HubAndSpoke;
  double acceptance_rate = NAN;
};

struct TuningResult {
  ProposalConfig proposal;
  std::vector<double> candidates;
  std::vector<double> acceptance;   // average acceptance per candidate
  std::vector<double> correlation;  // rho tuning only: average corr(X_sim, X_new)
  bool flagged = false;             // no candidate met the acceptance floor
  int steps_per_sim = 0;
  int sims_used = 0;                // simulated datasets whose solve was an SSOSP
};

struct Proposal {
  Dataset x;
  /// log q(current | proposed) - log q(proposed | current).
  double log_q_ratio = 0.0;
};

/// Redraws a uniformly random subset of s observations from their laws
/// under theta-hat.
Proposal subset_resample_proposal(const CondDensityContext& ctx, const Dataset& current,
                                  Eigen::Index s, Rng& rng);

/// rho * current + sqrt(1 - rho^2) * x_tmp with x_tmp drawn from P_theta-hat.
/// Only for zero-mean Gaussian models, where the kernel is reversible with
/// respect to P_theta-hat.
Proposal ar_mixing_proposal(const CondDensityContext& ctx, const Dataset& current, double rho,
                            Rng& rng);

Proposal propose(const CondDensityContext& ctx, const ProposalConfig& prop,
                 const Dataset& current, Rng& rng);

/// Metropolis-Hastings chain targeting the plug-in conditional law. The
/// current state's derivatives are cached between steps.
class MhChain {
 public:
  MhChain(const CondDensityContext& ctx, ProposalConfig prop, Dataset start);

  /// One MH step; returns true if the proposal was accepted.
  bool step(Rng& rng);
  void run(int steps, Rng& rng);

  [[nodiscard]] const Dataset& state() const { return state_; }
  [[nodiscard]] long proposed() const { return proposed_; }
  [[nodiscard]] long accepted() const { return accepted_; }

 private:
  const CondDensityContext* ctx_;
  ProposalConfig prop_;
  Dataset state_;
  PointEval eval_;
  long proposed_ = 0;
  long accepted_ = 0;
};

Dataset mh_step(const CondDensityContext& ctx, const ProposalConfig& prop, const Dataset& current,
                Rng& rng);

/// Hub after L steps from X, then M spokes of L steps from the hub, each on
/// its own child stream.
CopySet hub_and_spoke(const CondDensityContext& ctx, const ProposalConfig& prop, const Dataset& x,
                      int m, Rng& rng);

/// X is placed at a uniformly random position of a chain of M + 1 states
/// spaced L steps apart; the chain is run backwards and forwards from X.
CopySet permuted_serial(const CondDensityContext& ctx, const ProposalConfig& prop,
                        const Dataset& x, int m, Rng& rng);

/// Independent draws from the exact conditional law; throws
/// UnsupportedOperation for models without one.
CopySet iid_copies(const CondDensityContext& ctx, const Dataset& x, int m, Rng& rng);

CopySet sample_copies(const CondDensityContext& ctx, const ProposalConfig& prop, Topology topology,
                      const Dataset& x, int m, Rng& rng);

// Candidate selection rules, exposed for reuse and testing.

/// {1, 2, 5, 10, 20, n/2, n} restricted to [1, n], sorted and deduplicated.
std::vector<Eigen::Index> default_subset_candidates(Eigen::Index n);
std::vector<double> default_rho_candidates();

/// Index of the candidate maximizing s * A among those with A >= 0.2
/// (ties to the smaller s); the largest A if none qualifies, flagged.
std::pair<std::size_t, bool> select_subset_size(const std::vector<Eigen::Index>& candidates,
                                                const std::vector<double>& acceptance);
/// min(500, 2n / (s A)), rounded, at least 1.
int subset_chain_length(Eigen::Index n, Eigen::Index s, double acceptance);

/// Index of the candidate with the smallest correlation among those with
/// acceptance >= 0.05; the largest acceptance if none qualifies, flagged.
std::pair<std::size_t, bool> select_rho(const std::vector<double>& acceptance,
                                        const std::vector<double>& correlation);
/// min(500, 20 / (1 - max(corr, 0))), rounded.
int mixing_chain_length(double correlation);

/// Simulates from theta-hat, re-estimates, and measures acceptance over
/// `steps` MH steps per candidate.
TuningResult tune_subset_size(const Model& model, const Regularizer& reg,
                              const ParamVector& theta_hat, const AcssConfig& cfg,
                              const std::vector<Eigen::Index>& candidates, int reps, Rng& rng,
                              int steps = 50);

/// One MH step per candidate on each of `reps` simulated datasets; draws whose
/// solve is not an SSOSP are discarded.
TuningResult tune_mixing_rho(const Model& model, const Regularizer& reg,
                             const ParamVector& theta_hat, const AcssConfig& cfg,
                             const std::vector<double>& candidates, int reps, Rng& rng);

/// Dispatches on the model's proposal family with the default grids.
TuningResult tune_proposal(const Model& model, const Regularizer& reg, const ParamVector& theta_hat,
                           const AcssConfig& cfg, Eigen::Index n, Rng& rng, int subset_reps = 100,
                           int rho_reps = 500);

}  // namespace acss
