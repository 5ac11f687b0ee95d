#include <cmath>

#include "acss/models.hpp"

namespace acss {

namespace {

class BoundGlm final : public BoundModel {
 public:
  BoundGlm(const GlmModel& model, const ParamVector& theta)
      : BoundModel(theta), model_(model) {
    const Mat& z = model.covariates();
    eta_ = z * theta;
    const Eigen::Index n = z.rows();
    mean_.resize(n);
    Vec var(n);
    sum_a_ = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      sum_a_ += model.a(eta_[i]);
      mean_[i] = model.a1(eta_[i]);
      var[i] = model.a2(eta_[i]);
    }
    hess_ = z.transpose() * var.asDiagonal() * z;
  }

  Derivatives evaluate(const Dataset& x, int order) const override {
    const auto col = x.col();
    Derivatives d;
    d.value = sum_a_ - col.dot(eta_);
    if (model_.partition() == GlmPartition::Poisson)
      for (Eigen::Index i = 0; i < col.size(); ++i) d.value += std::lgamma(col[i] + 1.0);
    if (order >= 1) d.grad = model_.covariates().transpose() * (mean_ - col);
    if (order >= 2) d.hess = hess_;
    return d;
  }

  Dataset sample(Rng& rng) const override {
    Vec v(eta_.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = draw(i, rng);
    return Dataset::scalars(v);
  }

  double obs_log_density(const Dataset& x, Eigen::Index i) const override {
    const double xi = x.obs(i, 0);
    double lp = xi * eta_[i] - model_.a(eta_[i]);
    if (model_.partition() == GlmPartition::Poisson) lp -= std::lgamma(xi + 1.0);
    return lp;
  }

  void redraw(Dataset& x, std::span<const Eigen::Index> rows, Rng& rng) const override {
    for (auto i : rows) x.obs(i, 0) = draw(i, rng);
  }

 private:
  double draw(Eigen::Index i, Rng& rng) const {
    if (model_.partition() == GlmPartition::Logistic) return rng.bernoulli(mean_[i]) ? 1.0 : 0.0;
    return static_cast<double>(rng.poisson(mean_[i]));
  }

  const GlmModel& model_;
  Vec eta_, mean_;
  Mat hess_;
  double sum_a_ = 0.0;
};

}  // namespace

GlmModel::GlmModel(Mat covariates, GlmPartition partition)
    : z_(std::move(covariates)), partition_(partition) {
  if (z_.rows() < 1 || z_.cols() < 1) throw DomainError("glm: empty covariate matrix");
  if (!z_.allFinite()) throw DomainError("glm: covariates must be finite");
  const Mat gram = z_.transpose() * z_ / static_cast<double>(z_.rows());
  if (min_eigenvalue(gram) <= 1e-10)
    throw DomainError("glm: Z'Z / n is not positive definite");
}

std::string GlmModel::name() const {
  return partition_ == GlmPartition::Logistic ? "logistic" : "poisson";
}

double GlmModel::a(double eta) const {
  if (partition_ == GlmPartition::Poisson) return std::exp(eta);
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double GlmModel::a1(double eta) const {
  if (partition_ == GlmPartition::Poisson) return std::exp(eta);
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double GlmModel::a2(double eta) const {
  if (partition_ == GlmPartition::Poisson) return std::exp(eta);
  const double p = a1(eta);
  return p * (1.0 - p);
}

bool GlmModel::in_domain(const ParamVector& theta) const {
  return theta.size() == z_.cols() && theta.allFinite();
}

std::unique_ptr<BoundModel> GlmModel::bind(const ParamVector& theta) const {
  if (!in_domain(theta)) throw DomainError(name() + ": parameter not finite");
  return std::make_unique<BoundGlm>(*this, theta);
}

void GlmModel::check_data(const Dataset& x) const {
  if (x.n() != z_.rows() || x.k() != 1) throw DomainError(name() + ": expected n x 1 data");
}

InitialEstimate GlmModel::initial_estimate(const Dataset& x) const {
  check_data(x);
  ParamVector theta = Vec::Zero(dim());
  auto bound = bind(theta);
  Derivatives cur = bound->evaluate(x, 2);
  const double tol = 1e-10 * std::max(1.0, static_cast<double>(z_.rows()));
  for (int iter = 0; iter < 100 && cur.grad.norm() > tol; ++iter) {
    const Vec step = cur.hess.ldlt().solve(-cur.grad);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      ParamVector trial = theta + t * step;
      auto b = bind(trial);
      Derivatives d = b->evaluate(x, 2);
      if (std::isfinite(d.value) && d.value <= cur.value + 1e-4 * t * cur.grad.dot(step)) {
        theta = trial;
        cur = std::move(d);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return {theta, cur.grad.norm() > tol};
}

}  // namespace acss
