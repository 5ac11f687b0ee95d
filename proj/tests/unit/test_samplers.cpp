#include <cmath>
#include <numbers>

#include "acss/harness.hpp"
#include "acss/samplers.hpp"
#include "acss/statistics.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace acss;

namespace {

Mat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

int state_of(const Dataset& x) {
  int s = 0;
  for (Eigen::Index i = 0; i < x.n(); ++i) s |= static_cast<int>(x.obs(i, 0)) << i;
  return s;
}

Mat two_points() {
  Mat d(2, 2);
  d << 0.0, 1.0, 1.0, 0.0;
  return d;
}

double gaussian_logpdf(const Vec& x, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  const Vec z = llt.matrixL().solve(x);
  const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("enumerated logistic kernel keeps the target and is reversible") {
  Rng rng(101);
  oracle::LogisticEnumeration inst{random_matrix(5, 2, rng), Vec{{0.4, -0.3}}, 1.0};
  const GlmModel m(inst.z, GlmPartition::Logistic);
  const CondDensityContext ctx(m, zero_regularizer(), inst.theta_hat, AcssConfig{});
  // The library's target agrees with the enumeration up to a constant.
  const double c0 = ctx.evaluate(inst.dataset(0)).log_density - inst.log_target(0);
  for (int s = 1; s < inst.states(); ++s)
    CHECK(ctx.evaluate(inst.dataset(s)).log_density - inst.log_target(s) ==
          doctest::Approx(c0).epsilon(1e-10).scale(1.0));

  const Vec pi = inst.target();
  for (int s : {1, 2, 5}) {
    CAPTURE(s);
    const Mat t = inst.transition(s);
    CHECK((t.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((pi.transpose() * t - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    const Mat flow = pi.asDiagonal() * t;
    CHECK((flow - flow.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("one MH step matches the enumerated kernel on two observations") {
  oracle::LogisticEnumeration inst{Mat(Vec{{1.0, -0.5}}), Vec::Constant(1, 0.8), 1.0};
  const GlmModel m(inst.z, GlmPartition::Logistic);
  const CondDensityContext ctx(m, zero_regularizer(), inst.theta_hat, AcssConfig{});
  const Mat t = inst.transition(1);
  const ProposalConfig prop{ProposalFamily::SubsetResample, 1, 0.0, 1};
  Rng rng(7);
  const int draws = 40000;
  for (int from = 0; from < 4; ++from) {
    std::vector<long> counts(4, 0);
    for (int i = 0; i < draws; ++i) ++counts[state_of(mh_step(ctx, prop, inst.dataset(from), rng))];
    for (int to = 0; to < 4; ++to) {
      const double p = t(from, to);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / draws);
      CHECK(std::abs(static_cast<double>(counts[to]) / draws - p) <= 4.0 * se + 1e-12);
    }
  }
}

TEST_CASE("equal targets and symmetric proposals are always accepted") {
  const GlmModel m(Mat::Ones(1, 1), GlmPartition::Logistic);
  const CondDensityContext ctx(m, zero_regularizer(), Vec::Zero(1), AcssConfig{});
  MhChain chain(ctx, {ProposalFamily::SubsetResample, 1, 0.0, 1}, Dataset::scalars(Vec::Ones(1)));
  Rng rng(8);
  chain.run(1000, rng);
  CHECK(chain.proposed() == 1000);
  CHECK(chain.accepted() == 1000);
}

TEST_CASE("subset proposals") {
  Rng rng(9);
  const GlmModel m(random_matrix(6, 2, rng), GlmPartition::Logistic);
  const CondDensityContext ctx(m, zero_regularizer(), Vec{{0.2, 0.1}}, AcssConfig{});
  const Dataset a = Dataset::scalars(Vec::Zero(6)), b = Dataset::scalars(Vec::Ones(6));

  SUBCASE("a full redraw ignores the current state") {
    Rng r1(4), r2(4);
    CHECK(subset_resample_proposal(ctx, a, 6, r1).x == subset_resample_proposal(ctx, b, 6, r2).x);
  }
  SUBCASE("an unchanged redraw has zero proposal ratio") {
    int seen = 0;
    for (int i = 0; i < 200; ++i) {
      const Proposal p = subset_resample_proposal(ctx, a, 2, rng);
      if (!(p.x == a)) continue;
      CHECK(p.log_q_ratio == 0.0);
      ++seen;
    }
    CHECK(seen > 0);
  }
  SUBCASE("only the subset changes and the ratio is the block likelihood ratio") {
    const auto bound = m.bind(Vec{{0.2, 0.1}});
    for (int i = 0; i < 50; ++i) {
      const Proposal p = subset_resample_proposal(ctx, b, 1, rng);
      CHECK((p.x.obs - b.obs).cwiseAbs().sum() <= 1.0);
      CHECK(p.log_q_ratio == doctest::Approx(bound->neg_loglik(p.x) - bound->neg_loglik(b)));
    }
  }
  SUBCASE("configuration errors") {
    CHECK_THROWS_AS(subset_resample_proposal(ctx, a, 0, rng), ConfigError);
    CHECK_THROWS_AS(subset_resample_proposal(ctx, a, 7, rng), ConfigError);
    CHECK_THROWS_AS(ar_mixing_proposal(ctx, a, 0.5, rng), ConfigError);
    const auto s = SpatialModel::lattice(3);
    const CondDensityContext sc(s, zero_regularizer(), Vec::Constant(1, 0.5), AcssConfig{});
    CHECK_THROWS_AS(subset_resample_proposal(sc, Dataset::scalars(Vec::Zero(9)), 1, rng), ConfigError);
    CHECK_THROWS_AS(ar_mixing_proposal(sc, Dataset::scalars(Vec::Zero(9)), 1.0, rng), ConfigError);
  }
}

TEST_CASE("autoregressive proposals") {
  const SpatialModel two(two_points());
  const Vec th = Vec::Constant(1, std::log(2.0));
  const Mat cov = two.covariance(th[0]);
  const CondDensityContext ctx(two, zero_regularizer(), th, AcssConfig{});
  Rng rng(10);

  SUBCASE("reduced proposal ratio equals the transition density ratio") {
    const double rho = 0.5;
    for (int i = 0; i < 20; ++i) {
      const Dataset cur = two.sample_data(th, rng);
      const Proposal p = ar_mixing_proposal(ctx, cur, rho, rng);
      const Mat step_cov = (1 - rho * rho) * cov;
      const double back = gaussian_logpdf(cur.col() - rho * p.x.col(), step_cov);
      const double fwd = gaussian_logpdf(p.x.col() - rho * cur.col(), step_cov);
      CHECK(p.log_q_ratio == doctest::Approx(back - fwd).epsilon(1e-8).scale(1.0));
    }
  }
  SUBCASE("mean squared jump is 2 (1 - rho) tr(Sigma)") {
    for (double rho : {0.5, 0.999}) {
      CAPTURE(rho);
      std::vector<double> jump;
      for (int i = 0; i < 20000; ++i) {
        const Dataset cur = two.sample_data(th, rng);
        jump.push_back((ar_mixing_proposal(ctx, cur, rho, rng).x.obs - cur.obs).squaredNorm());
      }
      CHECK(std::abs(oracle::mean(jump) - 2.0 * (1.0 - rho) * cov.trace()) <= 3.0 * oracle::std_error(jump));
    }
  }
  SUBCASE("flows between two regions balance under the model law") {
    // x ~ N(0, Sigma), x' the proposal: P(x in A, x' in B) = P(x in B, x' in A).
    const auto in_a = [](const Dataset& x) { return x.obs(0, 0) > 1.0; };
    const auto in_b = [](const Dataset& x) { return x.obs(0, 0) + x.obs(1, 0) < 0.0; };
    std::vector<double> diff;
    for (int i = 0; i < 50000; ++i) {
      const Dataset x = two.sample_data(th, rng);
      const Dataset y = ar_mixing_proposal(ctx, x, 0.7, rng).x;
      diff.push_back(static_cast<double>(in_a(x) && in_b(y)) - static_cast<double>(in_b(x) && in_a(y)));
    }
    CHECK(std::abs(oracle::mean(diff)) <= 3.0 * oracle::std_error(diff));
  }
}

TEST_CASE("copy topologies in degenerate cases") {
  Rng rng(11);
  const GaussianMeanModel toy(6);
  const CondDensityContext ctx(toy, zero_regularizer(), Vec::Constant(1, 0.1), AcssConfig{});
  const Dataset x = toy.sample_data(Vec::Constant(1, 0.1), rng);
  const ProposalConfig zero_steps{ProposalFamily::SubsetResample, 2, 0.0, 0};
  for (auto topo : {Topology::HubAndSpoke, Topology::PermutedSerial}) {
    CAPTURE(to_string(topo));
    const CopySet c = sample_copies(ctx, zero_steps, topo, x, 5, rng);
    REQUIRE(c.copies.size() == 5);
    for (const auto& d : c.copies) CHECK(d == x);
    CHECK(sample_copies(ctx, zero_steps, topo, x, 0, rng).copies.empty());
  }
  CHECK(iid_copies(ctx, x, 0, rng).copies.empty());
  const auto s = SpatialModel::lattice(3);
  const CondDensityContext sc(s, zero_regularizer(), Vec::Constant(1, 0.5), AcssConfig{});
  CHECK_THROWS_AS(iid_copies(sc, Dataset::scalars(Vec::Zero(9)), 3, rng), UnsupportedOperation);
}

TEST_CASE("permuted serial with one copy") {
  const GaussianMeanModel toy(6);
  const CondDensityContext ctx(toy, zero_regularizer(), Vec::Constant(1, 0.0), AcssConfig{});
  const ProposalConfig prop{ProposalFamily::SubsetResample, 2, 0.0, 7};
  Rng data_rng(12);
  const Dataset x = toy.sample_data(Vec::Zero(1), data_rng);
  int x_last = 0;
  const int seeds = 2000;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const CopySet c = permuted_serial(ctx, prop, x, 1, rng);
    // Rebuild the expected copy: X sits at position 1 when pi(1) = 0, and the
    // copy then comes from the backward arm, otherwise from the forward arm.
    Rng ref(static_cast<std::uint64_t>(seed));
    const auto pi = ref.permutation(2);
    Rng back = ref.split(), fwd = ref.split();
    const bool star_last = pi[1] == 0;
    MhChain chain(ctx, prop, x);
    chain.run(prop.L, star_last ? back : fwd);
    CHECK(c.copies.at(0) == chain.state());
    x_last += star_last;
  }
  const double se = std::sqrt(0.25 / seeds);
  CHECK(std::abs(static_cast<double>(x_last) / seeds - 0.5) <= 3.0 * se);
}

TEST_CASE("exact conditional copies") {
  const Eigen::Index n = 8;
  const GaussianMeanModel toy(n);
  AcssConfig cfg;
  cfg.sigma = 1.3;
  const RidgeRegularizer ridge(2.0, Vec::Constant(1, 1.0));
  const double th = 0.4;
  const CondDensityContext ctx(toy, ridge, Vec::Constant(1, th), cfg);
  Rng rng(13);
  // Mean of x-bar under exp(-n (m - t)^2 / 2 - (n (t - m) + R'(t))^2 / (2 sigma^2)).
  const double nn = static_cast<double>(n), s2 = cfg.sigma * cfg.sigma, r1 = 2.0 * (th - 1.0);
  const double expected = (nn * th + nn * nn / s2 * (th + r1 / nn)) / (nn + nn * nn / s2);
  std::vector<double> means;
  const CopySet c = iid_copies(ctx, Dataset::scalars(Vec::Zero(n)), 10000, rng);
  for (const auto& d : c.copies) means.push_back(d.col().mean());
  CHECK(std::abs(oracle::mean(means) - expected) <= 3.0 * oracle::std_error(means));
}

TEST_CASE("exact conditional copies are exchangeable with the data") {
  const GaussianMeanModel toy(10);
  const ResidualKurtosisStatistic stat;
  AcssConfig cfg;
  Rng rng(14);
  std::vector<double> t_x, t_copy;
  for (int r = 0; r < 5000; ++r) {
    const Dataset x = toy.sample_data(Vec::Constant(1, 2.0), rng);
    const auto est = solve_perturbed(toy, zero_regularizer(), x, draw_noise(1, rng), cfg);
    REQUIRE(est.is_ssosp);
    const CondDensityContext ctx(toy, zero_regularizer(), est.theta_hat, cfg);
    t_x.push_back(stat.evaluate(x));
    t_copy.push_back(stat.evaluate(iid_copies(ctx, x, 1, rng).copies.at(0)));
  }
  CHECK(oracle::ks_two_sample_pvalue(t_x, t_copy) > 0.01);
}

TEST_CASE("chains stay in the support at the null settings") {
  const std::vector<std::pair<ExperimentKind, ProposalConfig>> setups{
      {ExperimentKind::LogisticCi, {ProposalFamily::SubsetResample, 5, 0.0, 1}},
      {ExperimentKind::BehrensFisher, {ProposalFamily::SubsetResample, 5, 0.0, 1}},
      {ExperimentKind::Spatial, {ProposalFamily::ArMixing, 1, 0.9, 1}},
      {ExperimentKind::Mvt, {ProposalFamily::SubsetResample, 5, 0.0, 1}},
  };
  for (const auto& [kind, prop] : setups) {
    CAPTURE(to_string(kind));
    const Experiment exp(default_config(kind));
    const AcssConfig cfg = exp.acss_config();
    Rng rng(derive_seed(15, {static_cast<std::uint64_t>(kind)}));
    std::optional<Replication> rep;
    SsospEstimate est;
    do {
      rep = exp.generate(0, rng);
      est = solve_perturbed(*rep->model, zero_regularizer(), rep->x, draw_noise(rep->model->dim(), rng), cfg);
    } while (!est.is_ssosp);
    const CondDensityContext ctx(*rep->model, zero_regularizer(), est.theta_hat, cfg);
    MhChain chain(ctx, prop, rep->x);
    int violations = 0;
    for (int i = 0; i < 10000; ++i)
      if (chain.step(rng) && !membership_check(ctx, chain.state())) ++violations;
    CHECK(violations == 0);
    CHECK(chain.accepted() > 0);
  }
}

TEST_CASE("copy sets are reproducible from the seed") {
  const auto m = SpatialModel::lattice(6);
  Rng data(16);
  const Vec th = Vec::Constant(1, 0.3);
  const Dataset x = m.sample_data(th, data);
  const CondDensityContext ctx(m, zero_regularizer(), th, AcssConfig{});
  const ProposalConfig prop{ProposalFamily::ArMixing, 1, 0.8, 5};
  for (auto topo : {Topology::HubAndSpoke, Topology::PermutedSerial}) {
    Rng a(3), b(3);
    const CopySet ca = sample_copies(ctx, prop, topo, x, 6, a);
    const CopySet cb = sample_copies(ctx, prop, topo, x, 6, b);
    REQUIRE(ca.copies.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(ca.copies[i] == cb.copies[i]);
    CHECK(ca.acceptance_rate == cb.acceptance_rate);
  }
}

TEST_CASE("tuning selection rules") {
  SUBCASE("subset size") {
    const auto [idx, flagged] = select_subset_size({1, 5, 10}, {0.9, 0.5, 0.1});
    CHECK(idx == 1);
    CHECK_FALSE(flagged);
    CHECK(subset_chain_length(100, 5, 0.5) == 80);
    CHECK(subset_chain_length(100, 1, 0.001) == 500);
    const auto [one, f1] = select_subset_size({3}, {0.1});
    CHECK(one == 0);
    CHECK(f1);
    const auto [one2, f2] = select_subset_size({3}, {0.3});
    CHECK(one2 == 0);
    CHECK_FALSE(f2);
    // s * A ties go to the smaller s.
    CHECK(select_subset_size({2, 4}, {0.5, 0.25}).first == 0);
    CHECK(select_subset_size({4, 2}, {0.25, 0.5}).first == 1);
    const auto [low, f3] = select_subset_size({1, 2, 5}, {0.1, 0.15, 0.05});
    CHECK(low == 1);
    CHECK(f3);
  }
  SUBCASE("mixing weight") {
    CHECK(mixing_chain_length(0.9) == 200);
    CHECK(mixing_chain_length(-0.3) == 20);
    CHECK(mixing_chain_length(0.0) == 20);
    CHECK(mixing_chain_length(0.99) == 500);
    const auto [idx, flagged] = select_rho({0.3, 0.1}, {0.8, 0.6});
    CHECK(idx == 1);
    CHECK_FALSE(flagged);
    CHECK(select_rho({0.3, 0.01}, {0.8, 0.6}).first == 0);
    const auto [best, f] = select_rho({0.01, 0.04, 0.02}, {0.1, 0.5, 0.2});
    CHECK(best == 1);
    CHECK(f);
  }
  SUBCASE("candidate grids") {
    CHECK(default_subset_candidates(100) == std::vector<Eigen::Index>{1, 2, 5, 10, 20, 50, 100});
    CHECK(default_subset_candidates(3) == std::vector<Eigen::Index>{1, 2, 3});
    CHECK(default_rho_candidates() == std::vector<double>{0.5, 0.8, 0.9, 0.95, 0.99});
  }
}

TEST_CASE("tuning is reproducible and respects the acceptance floors") {
  SUBCASE("subset size") {
    const BehrensFisherModel m(50, 50);
    const Vec th{{0.0, 1.0, 2.0}};
    AcssConfig cfg;
    cfg.radius_scale = 2.0;
    Rng a(5), b(5);
    const auto cands = default_subset_candidates(100);
    const auto ra = tune_subset_size(m, zero_regularizer(), th, cfg, cands, 10, a);
    const auto rb = tune_subset_size(m, zero_regularizer(), th, cfg, cands, 10, b);
    CHECK(ra.acceptance == rb.acceptance);
    CHECK(ra.proposal.s == rb.proposal.s);
    CHECK(ra.proposal.L == rb.proposal.L);
    CHECK(ra.steps_per_sim == 50);
    CHECK(ra.sims_used > 0);
    const auto chosen = static_cast<std::size_t>(
        std::find(cands.begin(), cands.end(), ra.proposal.s) - cands.begin());
    const bool any = std::any_of(ra.acceptance.begin(), ra.acceptance.end(), [](double v) { return v >= 0.2; });
    if (any) CHECK(ra.acceptance[chosen] >= 0.2);
  }
  SUBCASE("mixing weight") {
    const auto m = SpatialModel::lattice(6);
    const Vec th = Vec::Constant(1, 0.25);
    AcssConfig cfg;
    cfg.radius_scale = 2.0;
    Rng a(6), b(6);
    const auto ra = tune_mixing_rho(m, zero_regularizer(), th, cfg, default_rho_candidates(), 30, a);
    const auto rb = tune_mixing_rho(m, zero_regularizer(), th, cfg, default_rho_candidates(), 30, b);
    CHECK(ra.acceptance == rb.acceptance);
    CHECK(ra.correlation == rb.correlation);
    CHECK(ra.proposal.rho == rb.proposal.rho);
    CHECK(ra.proposal.L == rb.proposal.L);
    CHECK(ra.proposal.L == mixing_chain_length(
                               ra.correlation[static_cast<std::size_t>(
                                   std::find(ra.candidates.begin(), ra.candidates.end(), ra.proposal.rho) -
                                   ra.candidates.begin())]));
  }
  Rng rng(1);
  CHECK_THROWS_AS(tune_mixing_rho(GaussianMeanModel(3), zero_regularizer(), Vec::Zero(1), AcssConfig{},
                                  {1.5}, 3, rng),
                  ConfigError);
}
