#include "acss/model.hpp"

#include <cmath>

namespace acss {

double BoundModel::obs_log_density(const Dataset&, Eigen::Index) const {
  throw UnsupportedOperation("model does not factor over observations");
}

void BoundModel::redraw(Dataset&, std::span<const Eigen::Index>, Rng&) const {
  throw UnsupportedOperation("model does not support per-observation redraws");
}

Dataset Model::sample_exact_conditional(const ParamVector&, const Regularizer&, double,
                                        Rng&) const {
  throw UnsupportedOperation(name() + ": no exact conditional sampler");
}

double Model::neg_loglik(const ParamVector& theta, const Dataset& x) const {
  check_data(x);
  return bind(theta)->evaluate(x, 0).value;
}

Vec Model::grad_neg_loglik(const ParamVector& theta, const Dataset& x) const {
  check_data(x);
  return bind(theta)->evaluate(x, 1).grad;
}

Mat Model::hess_neg_loglik(const ParamVector& theta, const Dataset& x) const {
  check_data(x);
  return bind(theta)->evaluate(x, 2).hess;
}

Dataset Model::sample_data(const ParamVector& theta, Rng& rng) const {
  return bind(theta)->sample(rng);
}

void Model::resample_block(const ParamVector& theta, Dataset& x,
                           std::span<const Eigen::Index> rows, Rng& rng) const {
  bind(theta)->redraw(x, rows, rng);
}

const Regularizer& zero_regularizer() {
  static const ZeroRegularizer zero;
  return zero;
}

namespace {
void require_domain(const Model& model, const ParamVector& theta) {
  if (theta.size() != model.dim())
    throw DomainError(model.name() + ": parameter has wrong dimension");
  if (!model.in_domain(theta))
    throw DomainError(model.name() + ": parameter outside the parameter set");
}
}  // namespace

double penalized_objective(const Model& model, const Regularizer& reg,
                           const ParamVector& theta, const Dataset& x,
                           const NoiseVector& w, double sigma) {
  require_domain(model, theta);
  return model.neg_loglik(theta, x) + reg.value(theta) + sigma * w.dot(theta);
}

Vec grad_penalized_objective(const Model& model, const Regularizer& reg,
                             const ParamVector& theta, const Dataset& x,
                             const NoiseVector& w, double sigma) {
  require_domain(model, theta);
  return model.grad_neg_loglik(theta, x) + reg.grad(theta) + sigma * w;
}

Mat hess_penalized_objective(const Model& model, const Regularizer& reg,
                             const ParamVector& theta, const Dataset& x) {
  require_domain(model, theta);
  Mat h = model.hess_neg_loglik(theta, x) + reg.hess(theta);
  return 0.5 * (h + h.transpose());
}

Vec flatten_symmetric(const Mat& m) {
  const Eigen::Index k = m.rows();
  Vec v(symmetric_dim(k));
  Eigen::Index a = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j)
      v[a++] = (i == j) ? m(i, i) : std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
  return v;
}

Mat unflatten_symmetric(const Vec& v, Eigen::Index k) {
  if (v.size() != symmetric_dim(k)) throw DomainError("flattened size mismatch");
  Mat m(k, k);
  Eigen::Index a = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      const double e = (i == j) ? v[a] : v[a] / std::sqrt(2.0);
      m(i, j) = e;
      m(j, i) = e;
      ++a;
    }
  return m;
}

double min_eigenvalue(const Mat& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace acss
