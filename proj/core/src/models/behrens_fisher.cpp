#include <cmath>
#include <numbers>
#include <utility>

#include "acss/models.hpp"

namespace acss {

namespace {

class BoundBehrensFisher final : public BoundModel {
 public:
  BoundBehrensFisher(const ParamVector& theta, Eigen::Index n0, Eigen::Index n1)
      : BoundModel(theta), n_{n0, n1} {}

  Derivatives evaluate(const Dataset& x, int order) const override {
    const auto col = x.col();
    const double mu = theta()[0];
    const double g[2] = {theta()[1], theta()[2]};
    double s1[2], s2[2];
    const auto seg = [&](int k) { return k == 0 ? col.head(n_[0]) : col.tail(n_[1]); };
    for (int k = 0; k < 2; ++k) {
      const auto c = seg(k).array() - mu;
      s1[k] = c.sum();
      s2[k] = c.square().sum();
    }
    Derivatives d;
    d.value = 0.0;
    for (int k = 0; k < 2; ++k)
      d.value += 0.5 * n_[k] * std::log(2.0 * std::numbers::pi * g[k]) + s2[k] / (2.0 * g[k]);
    if (order >= 1) {
      d.grad.resize(3);
      d.grad[0] = -(s1[0] / g[0] + s1[1] / g[1]);
      for (int k = 0; k < 2; ++k)
        d.grad[1 + k] = n_[k] / (2.0 * g[k]) - s2[k] / (2.0 * g[k] * g[k]);
    }
    if (order >= 2) {
      d.hess = Mat::Zero(3, 3);
      d.hess(0, 0) = n_[0] / g[0] + n_[1] / g[1];
      for (int k = 0; k < 2; ++k) {
        d.hess(0, 1 + k) = d.hess(1 + k, 0) = s1[k] / (g[k] * g[k]);
        d.hess(1 + k, 1 + k) = -n_[k] / (2.0 * g[k] * g[k]) + s2[k] / (g[k] * g[k] * g[k]);
      }
    }
    return d;
  }

  Dataset sample(Rng& rng) const override {
    Vec v(n_[0] + n_[1]);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = draw(i, rng);
    return Dataset::scalars(v);
  }

  double obs_log_density(const Dataset& x, Eigen::Index i) const override {
    const double g = variance(i);
    const double r = x.obs(i, 0) - theta()[0];
    return -0.5 * std::log(2.0 * std::numbers::pi * g) - r * r / (2.0 * g);
  }

  void redraw(Dataset& x, std::span<const Eigen::Index> rows, Rng& rng) const override {
    for (auto i : rows) x.obs(i, 0) = draw(i, rng);
  }

 private:
  double variance(Eigen::Index i) const { return i < n_[0] ? theta()[1] : theta()[2]; }
  double draw(Eigen::Index i, Rng& rng) const {
    return rng.normal(theta()[0], std::sqrt(variance(i)));
  }

  Eigen::Index n_[2];
};

}  // namespace

BehrensFisherModel::BehrensFisherModel(Eigen::Index n0, Eigen::Index n1) : n0_(n0), n1_(n1) {
  if (n0 < 1 || n1 < 1) throw DomainError("behrens-fisher: both groups must be nonempty");
}

bool BehrensFisherModel::in_domain(const ParamVector& theta) const {
  return theta.size() == 3 && theta.allFinite() && theta[1] > 0.0 && theta[2] > 0.0;
}

double BehrensFisherModel::boundary_distance(const ParamVector& theta) const {
  return std::min(theta[1], theta[2]);
}

std::unique_ptr<BoundModel> BehrensFisherModel::bind(const ParamVector& theta) const {
  if (!in_domain(theta)) throw DomainError("behrens-fisher: variances must be positive");
  return std::make_unique<BoundBehrensFisher>(theta, n0_, n1_);
}

void BehrensFisherModel::check_data(const Dataset& x) const {
  if (x.n() != n0_ + n1_ || x.k() != 1)
    throw DomainError("behrens-fisher: expected (n0 + n1) x 1 data");
}

InitialEstimate BehrensFisherModel::initial_estimate(const Dataset& x) const {
  check_data(x);
  const auto col = x.col();
  const auto head = col.head(n0_), tail = col.tail(n1_);
  const auto spread = [&](double mu) {
    return std::pair{(head.array() - mu).square().mean(), (tail.array() - mu).square().mean()};
  };
  double mu = col.mean();
  auto [g0, g1] = spread(mu);
  InitialEstimate out{Vec(3), g0 < kVarianceFloor || g1 < kVarianceFloor};
  if (!out.fallback) {
    // Precision-weighted mean and group variances, iterated toward the
    // likelihood's stationary point. Pooled moments drift from it when the
    // group means differ.
    const double m0 = head.mean(), m1 = tail.mean();
    for (int it = 0; it < 100; ++it) {
      const double w0 = n0_ / g0, w1 = n1_ / g1;
      const double next = (w0 * m0 + w1 * m1) / (w0 + w1);
      const auto [h0, h1] = spread(next);
      if (!(h0 >= kVarianceFloor && h1 >= kVarianceFloor)) break;
      const bool done = std::abs(next - mu) <= 1e-12 * (1.0 + std::abs(mu));
      mu = next;
      g0 = h0;
      g1 = h1;
      if (done) break;
    }
  }
  out.theta[0] = mu;
  out.theta[1] = std::max(g0, kVarianceFloor);
  out.theta[2] = std::max(g1, kVarianceFloor);
  return out;
}

}  // namespace acss
