#include <algorithm>
#include <cmath>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "acss/acss.hpp"
#include "acss/models.hpp"
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

Mat two_points() {
  Mat d(2, 2);
  d << 0.0, 1.0, 1.0, 0.0;
  return d;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

TEST_CASE("logistic Hessian does not depend on the data") {
  Rng rng(1);
  const GlmModel m(random_matrix(40, 3, rng), GlmPartition::Logistic);
  const Vec theta = 0.4 * rng.normal_vector(3);
  const Dataset a = m.sample_data(theta, rng), b = m.sample_data(theta, rng);
  CHECK_FALSE(a == b);
  CHECK(m.hess_neg_loglik(theta, a) == m.hess_neg_loglik(theta, b));
  for (Eigen::Index i = 0; i < a.n(); ++i) CHECK((a.obs(i, 0) == 0.0 || a.obs(i, 0) == 1.0));
}

TEST_CASE("poisson partition function derivatives") {
  const GlmModel m(Mat::Ones(2, 1), GlmPartition::Poisson);
  for (double eta : {-1.0, 0.0, 0.7}) {
    CHECK(m.a(eta) == doctest::Approx(std::exp(eta)));
    CHECK(m.a1(eta) == doctest::Approx(std::exp(eta)));
    CHECK(m.a2(eta) == doctest::Approx(std::exp(eta)));
  }
  CHECK_THROWS_AS(GlmModel(Mat::Zero(3, 2), GlmPartition::Logistic), DomainError);
}

TEST_CASE("two-sample score vanishes at matching moments") {
  const BehrensFisherModel m(2, 2);
  // Both groups have mean 0.5; mean squared deviations 1 and 4.
  const Dataset x = Dataset::scalars(Vec{{-0.5, 1.5, -1.5, 2.5}});
  const Vec g = m.grad_neg_loglik(Vec{{0.5, 1.0, 4.0}}, x);
  CHECK(g.norm() < 1e-14);
}

TEST_CASE("two-sample expected Hessian is block diagonal") {
  const BehrensFisherModel m(50, 50);
  const Vec theta0{{0.0, 1.0, 2.0}};
  Rng rng(17);
  std::vector<double> h01, h02;
  for (int r = 0; r < 10000; ++r) {
    const Dataset x = m.sample_data(theta0, rng);
    const Mat h = m.hess_neg_loglik(theta0, x);
    h01.push_back(h(0, 1));
    h02.push_back(h(0, 2));
    CHECK(h(1, 2) == 0.0);
  }
  CHECK(std::abs(oracle::mean(h01)) <= 3.0 * oracle::std_error(h01));
  CHECK(std::abs(oracle::mean(h02)) <= 3.0 * oracle::std_error(h02));
}

TEST_CASE("spatial covariance") {
  const SpatialModel two(two_points());
  const Mat s = two.covariance(std::log(2.0));
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s(1, 0) == s(0, 1));

  const auto grid = SpatialModel::lattice(10);
  CHECK(grid.distances().rows() == 100);
  CHECK(grid.unit_pairs().size() == 180);
  for (double theta : {0.1, 0.25, 1.0}) {
    const Mat c = grid.covariance(theta);
    CHECK(c == c.transpose());
    Eigen::LLT<Mat> llt(c);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("spatial gradient at zero data is half the log-det derivative") {
  const auto grid = SpatialModel::lattice(10);
  const Dataset zero = Dataset::scalars(Vec::Zero(100));
  const double theta = 0.25, h = 1e-6;
  const auto logdet = [&](double t) {
    Eigen::LLT<Mat> llt(grid.covariance(t));
    return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  };
  const double expected = 0.5 * (logdet(theta + h) - logdet(theta - h)) / (2 * h);
  CHECK(grid.grad_neg_loglik(Vec::Constant(1, theta), zero)[0] ==
        doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("spatial draws have the model covariance") {
  const SpatialModel two(two_points());
  const auto bound = two.bind(Vec::Constant(1, std::log(2.0)));
  Rng rng(8);
  std::vector<double> prod;
  for (int i = 0; i < 20000; ++i) {
    const Dataset x = bound->sample(rng);
    prod.push_back(x.obs(0, 0) * x.obs(1, 0));
  }
  CHECK(std::abs(oracle::mean(prod) - 0.5) <= 3.0 * oracle::std_error(prod));
}

TEST_CASE("multivariate t gradient at zero data") {
  const MultivariateTModel m(1, 1, 2.0);
  const Dataset x(Mat::Zero(1, 1));
  // The score of log f is 1/2 here, so -log f has gradient -1/2.
  CHECK(m.grad_neg_loglik(Vec::Ones(1), x)[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("multivariate t expected Hessian satisfies its curvature lower bound") {
  const double dof = 2.0;
  const Eigen::Index n = 100, k = 2;
  const MultivariateTModel m(n, k, dof);
  Mat prec(2, 2);
  prec << 1.0, -0.5, -0.5, 2.0;
  const Vec theta0 = flatten_symmetric(prec);
  Rng rng(4);
  Mat avg = Mat::Zero(3, 3);
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) avg += m.hess_neg_loglik(theta0, m.sample_data(theta0, rng));
  avg /= reps;
  const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(prec).eigenvalues().maxCoeff();
  const double bound = 0.5 * n * dof / (dof + k + 2) / (lmax * lmax);
  for (int i = 0; i < 100; ++i) {
    const Vec u = rng.normal_vector(3).normalized();
    CHECK(u.dot(avg * u) >= bound);
  }
}

TEST_CASE("multivariate t draws follow the elliptical law") {
  // With identity precision |X|^2 / k is F(k, dof), so the median radius is
  // sqrt(k * F^{-1}(1/2)).
  const Eigen::Index n = 50000, k = 2;
  const double dof = 2.0;
  const MultivariateTModel m(n, k, dof);
  Rng rng(21);
  const Dataset x = m.sample_data(flatten_symmetric(Mat::Identity(k, k)), rng);
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = x.obs.row(i).norm();
  const boost::math::fisher_f_distribution<double> f(static_cast<double>(k), dof);
  const double med = std::sqrt(k * boost::math::quantile(f, 0.5));
  const double density = boost::math::pdf(f, med * med / k) * 2.0 * med / k;
  const double se = 1.0 / (2.0 * density * std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(median_of(r) - med) <= 3.0 * se);
}

TEST_CASE("initial estimates on hand-built data") {
  SUBCASE("two-sample pooled moments with a clamped variance") {
    const BehrensFisherModel m(2, 2);
    const auto e = m.initial_estimate(Dataset::scalars(Vec{{0.0, 2.0, 1.0, 1.0}}));
    CHECK(e.theta[0] == doctest::Approx(1.0));
    CHECK(e.theta[1] == doctest::Approx(1.0));
    CHECK(e.theta[2] == BehrensFisherModel::kVarianceFloor);
    CHECK(m.in_domain(e.theta));
  }
  SUBCASE("two-sample start is a likelihood stationary point when the means differ") {
    const BehrensFisherModel m(30, 40);
    Rng rng(8);
    Vec v = m.sample_data(Vec{{0.0, 1.0, 2.0}}, rng).col();
    v.tail(40).array() += 1.0;
    const Dataset x = Dataset::scalars(v);
    const auto e = m.initial_estimate(x);
    CHECK_FALSE(e.fallback);
    CHECK(m.grad_neg_loglik(e.theta, x).norm() <= 1e-8);
    CHECK(e.theta[0] != doctest::Approx(v.mean()));
  }
  SUBCASE("spatial neighbour products") {
    const SpatialModel m(two_points(), SpatialInit::NeighbourProducts);
    const double a = std::exp(-0.125);
    const auto e = m.initial_estimate(Dataset::scalars(Vec{{a, a}}));
    CHECK(e.theta[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK_FALSE(e.fallback);
    const auto f = m.initial_estimate(Dataset::scalars(Vec{{1.0, -1.0}}));
    CHECK(f.fallback);
    CHECK(f.theta[0] == SpatialModel::kFallbackTheta);
  }
  SUBCASE("t scale from the median absolute value") {
    const MultivariateTModel m(3, 1, 2.0, 0);
    const double q = boost::math::quantile(boost::math::students_t_distribution<double>(2.0), 0.75);
    CHECK(m.t_upper_quartile() == doctest::Approx(q).epsilon(1e-12));
    const auto e = m.initial_estimate(Dataset(Mat(Vec{{q, -0.5 * q, 3.0 * q}})));
    CHECK(e.theta[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("t estimate falls back to the diagonal for collinear data") {
    const MultivariateTModel m(4, 2, 2.0);
    Mat obs(4, 2);
    obs << 1, 1, 2, 2, -1, -1, 3, 3;
    const auto e = m.initial_estimate(Dataset(obs));
    CHECK(e.fallback);
    CHECK(m.in_domain(e.theta));
  }
}

TEST_CASE("profile grid initializer beats neighbour products on the lattice") {
  const auto grid = SpatialModel::lattice(10, 2, SpatialInit::ProfileGrid);
  const auto nb = SpatialModel::lattice(10, 2, SpatialInit::NeighbourProducts);
  const Vec theta0 = Vec::Constant(1, 0.25);
  Rng rng(30);
  std::vector<double> eg, en;
  for (int r = 0; r < 100; ++r) {
    const Dataset x = grid.sample_data(theta0, rng);
    const auto g = grid.initial_estimate(x);
    CHECK(grid.in_domain(g.theta));
    eg.push_back(std::abs(g.theta[0] - 0.25));
    en.push_back(std::abs(nb.initial_estimate(x).theta[0] - 0.25));
  }
  CHECK(median_of(eg) < median_of(en));
  CHECK(median_of(eg) < 0.1);
}

TEST_CASE("initial estimates get closer to the truth as n doubles") {
  Rng rng(99);
  const auto median_error = [&](const Model& m, const Vec& theta0) {
    std::vector<double> err;
    for (int r = 0; r < 200; ++r)
      err.push_back((m.initial_estimate(m.sample_data(theta0, rng)).theta - theta0).norm());
    return median_of(err);
  };
  SUBCASE("logistic") {
    const GlmModel small(random_matrix(100, 5, rng), GlmPartition::Logistic);
    const GlmModel large(random_matrix(200, 5, rng), GlmPartition::Logistic);
    const Vec t = Vec::Constant(5, 0.2);
    CHECK(median_error(large, t) < median_error(small, t));
  }
  SUBCASE("behrens-fisher") {
    const Vec t{{0.0, 1.0, 2.0}};
    CHECK(median_error(BehrensFisherModel(100, 100), t) < median_error(BehrensFisherModel(50, 50), t));
  }
  SUBCASE("spatial") {
    const Vec t = Vec::Constant(1, 0.25);
    CHECK(median_error(SpatialModel::lattice(14), t) < median_error(SpatialModel::lattice(10), t));
  }
  SUBCASE("mvt") {
    Mat prec(2, 2);
    prec << 1.0, -0.5, -0.5, 2.0;
    const Vec t = flatten_symmetric(prec);
    CHECK(median_error(MultivariateTModel(200, 2, 2.0), t) <
          median_error(MultivariateTModel(100, 2, 2.0), t));
  }
}

TEST_CASE("kendall tau and median helpers") {
  const Vec a{{1.0, 2.0, 3.0, 4.0}};
  CHECK(kendall_tau(a, a) == 1.0);
  CHECK(kendall_tau(a, -a) == -1.0);
  CHECK(kendall_tau(a, Vec{{1.0, 3.0, 2.0, 4.0}}) == doctest::Approx(4.0 / 6.0));
  CHECK(median(Vec{{3.0, 1.0, 2.0}}) == 2.0);
  CHECK(median(Vec{{4.0, 1.0, 3.0, 2.0}}) == 2.5);
}

TEST_CASE("test statistics") {
  SUBCASE("anisotropy is zero on a constant field and sign symmetric") {
    const AnisotropyStatistic t2(2);
    CHECK(t2.evaluate(Dataset::scalars(Vec::Ones(4))) == 0.0);
    Rng rng(2);
    const AnisotropyStatistic t10(10);
    const Dataset x = Dataset::scalars(rng.normal_vector(100));
    CHECK(t10.evaluate(x) == t10.evaluate(Dataset(-x.obs)));
    // Points 0 and 1 share the first coordinate: a vertical pair.
    Vec v = Vec::Zero(4);
    v[0] = v[1] = 1.0;
    CHECK(t2.evaluate(Dataset::scalars(v)) == -1.0);
    v << 1.0, 0.0, 1.0, 0.0;
    CHECK(t2.evaluate(Dataset::scalars(v)) == 1.0);
  }
  SUBCASE("tail ratio") {
    const TailRatioStatistic t;
    Mat obs(5, 2);
    obs << 1, 0, 0, 1, 0.6, 0.8, -1, 0, 0, -1;
    CHECK(t.evaluate(Dataset(obs)) == doctest::Approx(5.0).epsilon(1e-14));
    Rng rng(6);
    const Dataset x(random_matrix(30, 2, rng));
    CHECK(t.evaluate(Dataset(-3.5 * x.obs)) == doctest::Approx(t.evaluate(x)).epsilon(1e-13));
  }
  SUBCASE("least squares coefficient matches the normal equations") {
    Rng rng(12);
    const Mat z = random_matrix(6, 2, rng);
    const Vec y = rng.normal_vector(6), xv = rng.normal_vector(6);
    Mat design(6, 3);
    design << xv, z;
    const Vec beta = (design.transpose() * design).inverse() * (design.transpose() * y);
    const OlsCoefficientStatistic t(y, z);
    CHECK(t.evaluate(Dataset::scalars(xv)) == doctest::Approx(std::abs(beta[0])).epsilon(1e-10));
    CHECK_THROWS_AS((void)t.evaluate(Dataset::scalars(z.col(0))), NumericalError);
  }
  SUBCASE("mean difference and residual kurtosis") {
    const MeanDifferenceStatistic md(2, 3);
    CHECK(md.evaluate(Dataset::scalars(Vec{{1.0, 3.0, 0.0, 0.0, 3.0}})) == 1.0);
    const ResidualKurtosisStatistic k;
    Rng rng(13);
    const Vec v = rng.normal_vector(25);
    CHECK(k.evaluate(Dataset::scalars(v)) ==
          doctest::Approx(k.evaluate(Dataset::scalars((v.array() + 4.0).matrix()))).epsilon(1e-12));
  }
}

TEST_CASE("oracle copies") {
  const BehrensFisherModel m(10, 10);
  const Vec theta0{{0.0, 1.0, 2.0}};
  Rng rng(40);
  const Dataset x = m.sample_data(theta0, rng);
  const MeanDifferenceStatistic t(10, 10);
  CHECK(oracle_copies(m, theta0, 0, rng).copies.empty());
  CHECK(oracle_pvalue(m, theta0, x, t, 0, rng) == 1.0);

  std::vector<double> a, b;
  for (int i = 0; i < 2000; ++i) {
    const CopySet c = oracle_copies(m, theta0, 2, rng);
    REQUIRE(c.copies.size() == 2);
    a.push_back(t.evaluate(c.copies[0]));
    b.push_back(t.evaluate(c.copies[1]));
  }
  const double ma = oracle::mean(a), mb = oracle::mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  const double corr = sab / std::sqrt(saa * sbb);
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(2000.0));
}
