#include "acss/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace acss {

std::string to_string(Topology t) {
  switch (t) {
    case Topology::Iid: return "iid";
    case Topology::HubAndSpoke: return "hub-and-spoke";
    case Topology::PermutedSerial: return "permuted-serial";
  }
  return "?";
}

Topology parse_topology(const std::string& s) {
  if (s == "iid") return Topology::Iid;
  if (s == "hub-and-spoke" || s == "hub") return Topology::HubAndSpoke;
  if (s == "permuted-serial" || s == "serial") return Topology::PermutedSerial;
  throw ConfigError("unknown topology '" + s + "'");
}

Proposal subset_resample_proposal(const CondDensityContext& ctx, const Dataset& current,
                                  Eigen::Index s, Rng& rng) {
  if (ctx.model().proposal_family() != ProposalFamily::SubsetResample)
    throw ConfigError(ctx.model().name() + ": subset resampling needs independent observations");
  const Eigen::Index n = current.n();
  if (s < 1 || s > n) throw ConfigError("subset size must be in [1, n]");
  const BoundModel& bound = ctx.bound();
  const auto rows = rng.subset(n, s);
  Proposal p{current, 0.0};
  bound.redraw(p.x, rows, rng);
  // Per-row differences, so rows that redraw to the same value add exactly 0.
  for (auto i : rows) p.log_q_ratio += bound.obs_log_density(current, i) - bound.obs_log_density(p.x, i);
  return p;
}

Proposal ar_mixing_proposal(const CondDensityContext& ctx, const Dataset& current, double rho,
                            Rng& rng) {
  if (ctx.model().proposal_family() != ProposalFamily::ArMixing)
    throw ConfigError(ctx.model().name() + ": AR mixing needs a zero-mean Gaussian model");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must be in (0, 1)");
  const BoundModel& bound = ctx.bound();
  const Dataset tmp = bound.sample(rng);
  Proposal p{Dataset(rho * current.obs + std::sqrt(1.0 - rho * rho) * tmp.obs), 0.0};
  // Reversibility: q(x|x') f(x') = q(x'|x) f(x).
  p.log_q_ratio = bound.neg_loglik(p.x) - bound.neg_loglik(current);
  return p;
}

Proposal propose(const CondDensityContext& ctx, const ProposalConfig& prop, const Dataset& current,
                 Rng& rng) {
  if (prop.family == ProposalFamily::ArMixing) return ar_mixing_proposal(ctx, current, prop.rho, rng);
  return subset_resample_proposal(ctx, current, prop.s, rng);
}

MhChain::MhChain(const CondDensityContext& ctx, ProposalConfig prop, Dataset start)
    : ctx_(&ctx), prop_(prop), state_(std::move(start)), eval_(ctx.evaluate(state_)) {}

bool MhChain::step(Rng& rng) {
  ++proposed_;
  Proposal p = propose(*ctx_, prop_, state_, rng);
  const double u = rng.uniform();
  PointEval next;
  try {
    next = ctx_->evaluate(p.x);
  } catch (const std::exception&) {
    return false;
  }
  if (!next.hess_pd) return false;
  const double log_a = next.log_density - eval_.log_density + p.log_q_ratio;
  if (!(std::log(u) < log_a)) return false;
  if (!ctx_->member(p.x, next)) return false;
  state_ = std::move(p.x);
  eval_ = std::move(next);
  ++accepted_;
  return true;
}

void MhChain::run(int steps, Rng& rng) {
  for (int i = 0; i < steps; ++i) step(rng);
}

Dataset mh_step(const CondDensityContext& ctx, const ProposalConfig& prop, const Dataset& current,
                Rng& rng) {
  MhChain chain(ctx, prop, current);
  chain.step(rng);
  return chain.state();
}

namespace {

double rate(long accepted, long proposed) {
  return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : NAN;
}

}  // namespace

CopySet hub_and_spoke(const CondDensityContext& ctx, const ProposalConfig& prop, const Dataset& x,
                      int m, Rng& rng) {
  CopySet out;
  out.topology = Topology::HubAndSpoke;
  if (m <= 0) return out;
  MhChain hub(ctx, prop, x);
  hub.run(prop.L, rng);
  long acc = hub.accepted(), tot = hub.proposed();
  out.copies.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Rng child = rng.split();
    MhChain spoke(ctx, prop, hub.state());
    spoke.run(prop.L, child);
    acc += spoke.accepted();
    tot += spoke.proposed();
    out.copies.push_back(spoke.state());
  }
  out.acceptance_rate = rate(acc, tot);
  return out;
}

CopySet permuted_serial(const CondDensityContext& ctx, const ProposalConfig& prop,
                        const Dataset& x, int m, Rng& rng) {
  CopySet out;
  out.topology = Topology::PermutedSerial;
  if (m <= 0) return out;
  // pi[pos] is the label of the state at chain position pos; X has label 0.
  const auto pi = rng.permutation(static_cast<std::size_t>(m) + 1);
  const auto star = static_cast<std::size_t>(std::find(pi.begin(), pi.end(), 0) - pi.begin());
  std::vector<Dataset> chain(pi.size());
  chain[star] = x;
  long acc = 0, tot = 0;
  {
    Rng back = rng.split();
    MhChain c(ctx, prop, x);
    for (std::size_t pos = star; pos-- > 0;) {
      c.run(prop.L, back);
      chain[pos] = c.state();
    }
    acc += c.accepted();
    tot += c.proposed();
  }
  {
    Rng fwd = rng.split();
    MhChain c(ctx, prop, x);
    for (std::size_t pos = star + 1; pos < chain.size(); ++pos) {
      c.run(prop.L, fwd);
      chain[pos] = c.state();
    }
    acc += c.accepted();
    tot += c.proposed();
  }
  out.copies.resize(static_cast<std::size_t>(m));
  for (std::size_t pos = 0; pos < chain.size(); ++pos)
    if (pos != star) out.copies[pi[pos] - 1] = std::move(chain[pos]);
  out.acceptance_rate = rate(acc, tot);
  return out;
}

CopySet iid_copies(const CondDensityContext& ctx, const Dataset& x, int m, Rng& rng) {
  (void)x;
  CopySet out;
  out.topology = Topology::Iid;
  for (int i = 0; i < m; ++i)
    out.copies.push_back(
        ctx.model().sample_exact_conditional(ctx.theta_hat(), ctx.reg(), ctx.sigma(), rng));
  out.acceptance_rate = 1.0;
  return out;
}

CopySet sample_copies(const CondDensityContext& ctx, const ProposalConfig& prop, Topology topology,
                      const Dataset& x, int m, Rng& rng) {
  switch (topology) {
    case Topology::Iid: return iid_copies(ctx, x, m, rng);
    case Topology::HubAndSpoke: return hub_and_spoke(ctx, prop, x, m, rng);
    case Topology::PermutedSerial: return permuted_serial(ctx, prop, x, m, rng);
  }
  throw ConfigError("unknown topology");
}

std::vector<Eigen::Index> default_subset_candidates(Eigen::Index n) {
  std::vector<Eigen::Index> c{1, 2, 5, 10, 20, n / 2, n};
  std::erase_if(c, [n](Eigen::Index s) { return s < 1 || s > n; });
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

std::vector<double> default_rho_candidates() { return {0.5, 0.8, 0.9, 0.95, 0.99}; }

std::pair<std::size_t, bool> select_subset_size(const std::vector<Eigen::Index>& candidates,
                                                const std::vector<double>& acceptance) {
  if (candidates.empty() || candidates.size() != acceptance.size())
    throw ConfigError("subset tuning: candidate and acceptance lists must match and be nonempty");
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a] < candidates[b]; });
  std::optional<std::size_t> best;
  for (auto i : order) {
    if (!(acceptance[i] >= 0.2)) continue;
    const double score = static_cast<double>(candidates[i]) * acceptance[i];
    if (!best || score > static_cast<double>(candidates[*best]) * acceptance[*best]) best = i;
  }
  if (best) return {*best, false};
  std::size_t arg = order.front();
  for (auto i : order)
    if (acceptance[i] > acceptance[arg]) arg = i;
  return {arg, true};
}

int subset_chain_length(Eigen::Index n, Eigen::Index s, double acceptance) {
  const double raw = 2.0 * static_cast<double>(n) / (static_cast<double>(s) * acceptance);
  if (!(raw < 500.0)) return 500;
  return std::max(1, static_cast<int>(std::lround(raw)));
}

std::pair<std::size_t, bool> select_rho(const std::vector<double>& acceptance,
                                        const std::vector<double>& correlation) {
  if (acceptance.empty() || acceptance.size() != correlation.size())
    throw ConfigError("rho tuning: acceptance and correlation lists must match and be nonempty");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < acceptance.size(); ++i) {
    if (!(acceptance[i] >= 0.05)) continue;
    if (!best || correlation[i] < correlation[*best]) best = i;
  }
  if (best) return {*best, false};
  std::size_t arg = 0;
  for (std::size_t i = 1; i < acceptance.size(); ++i)
    if (acceptance[i] > acceptance[arg]) arg = i;
  return {arg, true};
}

int mixing_chain_length(double correlation) {
  const double c = std::isfinite(correlation) ? std::max(correlation, 0.0) : 1.0;
  if (c >= 1.0) return 500;
  const double raw = 20.0 / (1.0 - c);
  if (!(raw < 500.0)) return 500;
  return std::max(1, static_cast<int>(std::lround(raw)));
}

namespace {

// Simulated dataset from theta-hat with its own estimate, or nothing if the
// solve fails.
std::optional<std::pair<Dataset, SsospEstimate>> simulate(const Model& model,
                                                          const Regularizer& reg,
                                                          const BoundModel& truth,
                                                          const AcssConfig& cfg, Rng& rng) {
  try {
    Dataset xs = truth.sample(rng);
    const NoiseVector w = draw_noise(model.dim(), rng);
    SsospEstimate est = solve_perturbed(model, reg, xs, w, cfg);
    if (!est.is_ssosp) return std::nullopt;
    return std::make_pair(std::move(xs), std::move(est));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

double correlation(const Mat& a, const Mat& b) {
  const Eigen::Map<const Vec> x(a.data(), a.size()), y(b.data(), b.size());
  const Vec xc = x.array() - x.mean(), yc = y.array() - y.mean();
  const double den = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  return den > 0.0 ? xc.dot(yc) / den : 1.0;
}

}  // namespace

TuningResult tune_subset_size(const Model& model, const Regularizer& reg,
                              const ParamVector& theta_hat, const AcssConfig& cfg,
                              const std::vector<Eigen::Index>& candidates, int reps, Rng& rng,
                              int steps) {
  if (candidates.empty()) throw ConfigError("subset tuning: no candidates");
  if (reps < 1) throw ConfigError("subset tuning: reps must be >= 1");
  const auto truth = model.bind(theta_hat);
  const std::size_t k = candidates.size();
  std::vector<long> acc(k, 0), tot(k, 0);
  Eigen::Index n = 0;
  TuningResult out;
  out.steps_per_sim = steps;
  for (int r = 0; r < reps; ++r) {
    Rng sim_rng = rng.split();
    auto sim = simulate(model, reg, *truth, cfg, sim_rng);
    if (!sim) continue;
    ++out.sims_used;
    n = sim->first.n();
    const CondDensityContext ctx(model, reg, sim->second.theta_hat, cfg);
    for (std::size_t c = 0; c < k; ++c) {
      Rng chain_rng = sim_rng.split();
      const Eigen::Index s = std::min(candidates[c], n);
      MhChain chain(ctx, ProposalConfig{ProposalFamily::SubsetResample, s, 0.0, 1},
                    sim->first);
      chain.run(steps, chain_rng);
      acc[c] += chain.accepted();
      tot[c] += chain.proposed();
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    out.candidates.push_back(static_cast<double>(candidates[c]));
    out.acceptance.push_back(tot[c] > 0 ? rate(acc[c], tot[c]) : 0.0);
  }
  const auto [idx, flagged] = select_subset_size(candidates, out.acceptance);
  out.flagged = flagged;
  out.proposal.family = ProposalFamily::SubsetResample;
  out.proposal.s = candidates[idx];
  out.proposal.L = subset_chain_length(n > 0 ? n : candidates[idx], candidates[idx],
                                       out.acceptance[idx]);
  return out;
}

TuningResult tune_mixing_rho(const Model& model, const Regularizer& reg,
                             const ParamVector& theta_hat, const AcssConfig& cfg,
                             const std::vector<double>& candidates, int reps, Rng& rng) {
  if (candidates.empty()) throw ConfigError("rho tuning: no candidates");
  if (reps < 1) throw ConfigError("rho tuning: reps must be >= 1");
  for (double rho : candidates)
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho tuning: candidates must be in (0, 1)");
  const auto truth = model.bind(theta_hat);
  const std::size_t k = candidates.size();
  std::vector<double> acc(k, 0.0), corr(k, 0.0);
  TuningResult out;
  out.steps_per_sim = 1;
  for (int r = 0; r < reps; ++r) {
    Rng sim_rng = rng.split();
    auto sim = simulate(model, reg, *truth, cfg, sim_rng);
    if (!sim) continue;
    ++out.sims_used;
    const CondDensityContext ctx(model, reg, sim->second.theta_hat, cfg);
    for (std::size_t c = 0; c < k; ++c) {
      Rng chain_rng = sim_rng.split();
      MhChain chain(ctx, ProposalConfig{ProposalFamily::ArMixing, 1, candidates[c], 1},
                    sim->first);
      if (chain.step(chain_rng)) acc[c] += 1.0;
      corr[c] += correlation(sim->first.obs, chain.state().obs);
    }
  }
  const double used = std::max(1, out.sims_used);
  for (std::size_t c = 0; c < k; ++c) {
    out.candidates.push_back(candidates[c]);
    out.acceptance.push_back(acc[c] / used);
    out.correlation.push_back(out.sims_used > 0 ? corr[c] / used : 1.0);
  }
  const auto [idx, flagged] = select_rho(out.acceptance, out.correlation);
  out.flagged = flagged;
  out.proposal.family = ProposalFamily::ArMixing;
  out.proposal.rho = candidates[idx];
  out.proposal.L = mixing_chain_length(out.correlation[idx]);
  return out;
}

TuningResult tune_proposal(const Model& model, const Regularizer& reg, const ParamVector& theta_hat,
                           const AcssConfig& cfg, Eigen::Index n, Rng& rng, int subset_reps,
                           int rho_reps) {
  if (model.proposal_family() == ProposalFamily::ArMixing)
    return tune_mixing_rho(model, reg, theta_hat, cfg, default_rho_candidates(), rho_reps, rng);
  return tune_subset_size(model, reg, theta_hat, cfg, default_subset_candidates(n), subset_reps,
                          rng);
}

}  // namespace acss
