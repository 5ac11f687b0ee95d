#include <cmath>
#include <numbers>

#include "acss/models.hpp"

namespace acss {

namespace {

class BoundGaussianMean final : public BoundModel {
 public:
  BoundGaussianMean(const ParamVector& theta, Eigen::Index n)
      : BoundModel(theta), mean_(theta[0]), n_(n) {}

  Derivatives evaluate(const Dataset& x, int order) const override {
    const auto col = x.col();
    const auto n = static_cast<double>(col.size());
    Derivatives d;
    d.value = 0.5 * (col.array() - mean_).square().sum();
    if (order >= 1) d.grad = Vec::Constant(1, n * mean_ - col.sum());
    if (order >= 2) d.hess = Mat::Constant(1, 1, n);
    return d;
  }

  Dataset sample(Rng& rng) const override {
    Vec v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) v[i] = rng.normal(mean_, 1.0);
    return Dataset::scalars(v);
  }

  double obs_log_density(const Dataset& x, Eigen::Index i) const override {
    const double r = x.obs(i, 0) - mean_;
    return -0.5 * r * r - 0.5 * std::log(2.0 * std::numbers::pi);
  }

  void redraw(Dataset& x, std::span<const Eigen::Index> rows, Rng& rng) const override {
    for (auto i : rows) x.obs(i, 0) = rng.normal(mean_, 1.0);
  }

 private:
  double mean_;
  Eigen::Index n_;
};

}  // namespace

GaussianMeanModel::GaussianMeanModel(Eigen::Index n) : n_(n) {
  if (n < 1) throw DomainError("gaussian-mean: n must be >= 1");
}

bool GaussianMeanModel::in_domain(const ParamVector& theta) const {
  return theta.size() == 1 && std::isfinite(theta[0]);
}

std::unique_ptr<BoundModel> GaussianMeanModel::bind(const ParamVector& theta) const {
  if (!in_domain(theta)) throw DomainError("gaussian-mean: parameter not finite");
  return std::make_unique<BoundGaussianMean>(theta, n_);
}

void GaussianMeanModel::check_data(const Dataset& x) const {
  if (x.n() != n_ || x.k() != 1) throw DomainError("gaussian-mean: expected n x 1 data");
}

InitialEstimate GaussianMeanModel::initial_estimate(const Dataset& x) const {
  check_data(x);
  return {Vec::Constant(1, x.col().mean()), false};
}

Dataset GaussianMeanModel::sample_exact_conditional(const ParamVector& theta_hat,
                                                    const Regularizer& reg, double sigma,
                                                    Rng& rng) const {
  // Given theta-hat the residuals x - mean(x) are N(0, I - 11'/n) and the
  // sample mean is Gaussian: -log f contributes n (xbar - t)^2 / 2 and the
  // gradient penalty (n (t - xbar) + R'(t))^2 / (2 sigma^2). The Hessian
  // n + R''(t) does not depend on x.
  const double t = theta_hat[0];
  const double n = static_cast<double>(n_);
  const double r1 = reg.grad(theta_hat)[0];
  const double precision = n + n * n / (sigma * sigma);
  const double mean = t + (n * r1 / (sigma * sigma)) / precision;
  const double xbar = rng.normal(mean, 1.0 / std::sqrt(precision));
  Vec z = rng.normal_vector(n_);
  z.array() += xbar - z.mean();
  return Dataset::scalars(z);
}

}  // namespace acss
