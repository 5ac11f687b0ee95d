#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "acss/models.hpp"

namespace acss {

namespace {

// Orthonormal basis of symmetric matrices matching flatten_symmetric():
// x' E_a x is x_i^2 on the diagonal and sqrt(2) x_i x_j off it.
std::vector<Mat> basis_matrices(Eigen::Index k) {
  std::vector<Mat> out;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      Mat e = Mat::Zero(k, k);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = e(j, i) = 1.0 / std::sqrt(2.0);
      }
      out.push_back(std::move(e));
    }
  return out;
}

class BoundMvt final : public BoundModel {
 public:
  BoundMvt(const MultivariateTModel& model, const ParamVector& theta, Eigen::Index n)
      : BoundModel(theta), k_(model.k()), n_(n), dof_(model.dof()) {
    prec_ = unflatten_symmetric(theta, k_);
    Eigen::LLT<Mat> llt(prec_);
    if (llt.info() != Eigen::Success) throw DomainError("mvt: precision not positive definite");
    const Mat lp = llt.matrixL();
    log_det_ = 2.0 * lp.diagonal().array().log().sum();
    inv_ = llt.solve(Mat::Identity(k_, k_));
    Eigen::LLT<Mat> scale(inv_);
    scale_factor_ = scale.matrixL();
    log_c_ = model.log_normalizer();
    const double nd = static_cast<double>(n_);
    grad_const_ = flatten_symmetric(-0.5 * nd * inv_);
    const auto basis = basis_matrices(k_);
    const auto d = static_cast<Eigen::Index>(basis.size());
    hess_const_.resize(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = a; b < d; ++b)
        hess_const_(a, b) = hess_const_(b, a) =
            0.5 * nd * (inv_ * basis[a] * inv_ * basis[b]).trace();
  }

  Derivatives evaluate(const Dataset& x, int order) const override {
    const double half = 0.5 * (dof_ + static_cast<double>(k_));
    Derivatives out;
    out.value = -static_cast<double>(n_) * (log_c_ + 0.5 * log_det_);
    if (order >= 1) out.grad = grad_const_;
    if (order >= 2) out.hess = hess_const_;
    const Mat& obs = x.obs;
    const Vec denom = (dof_ + ((obs * prec_).cwiseProduct(obs)).rowwise().sum().array()).matrix();
    out.value += half * denom.array().log().sum();
    if (order >= 1) {
      // Row i of e holds the basis quadratics of observation i.
      Mat e(obs.rows(), grad_const_.size());
      Eigen::Index a = 0;
      for (Eigen::Index i = 0; i < k_; ++i)
        for (Eigen::Index j = i; j < k_; ++j)
          e.col(a++) = (i == j ? 1.0 : std::sqrt(2.0)) * obs.col(i).cwiseProduct(obs.col(j));
      const Vec w1 = half * denom.cwiseInverse();
      out.grad.noalias() += e.transpose() * w1;
      if (order >= 2) {
        const Vec w2 = w1.cwiseProduct(denom.cwiseInverse());
        out.hess.noalias() -= e.transpose() * (e.array().colwise() * w2.array()).matrix();
      }
    }
    return out;
  }

  Dataset sample(Rng& rng) const override {
    Mat obs(n_, k_);
    for (Eigen::Index i = 0; i < n_; ++i) obs.row(i) = draw(rng);
    return Dataset(std::move(obs));
  }

  double obs_log_density(const Dataset& x, Eigen::Index i) const override {
    const auto row = x.obs.row(i);
    const double denom = dof_ + row * prec_ * row.transpose();
    return log_c_ + 0.5 * log_det_ - 0.5 * (dof_ + static_cast<double>(k_)) * std::log(denom);
  }

  void redraw(Dataset& x, std::span<const Eigen::Index> rows, Rng& rng) const override {
    for (auto i : rows) x.obs.row(i) = draw(rng);
  }

 private:
  Eigen::RowVectorXd draw(Rng& rng) const {
    const Vec z = scale_factor_ * rng.normal_vector(k_);
    return (z / std::sqrt(rng.chi_squared(dof_) / dof_)).transpose();
  }

  Eigen::Index k_, n_;
  double dof_;
  Mat prec_, inv_, scale_factor_, hess_const_;
  Vec grad_const_;
  double log_det_ = 0, log_c_ = 0;
};

}  // namespace

MultivariateTModel::MultivariateTModel(Eigen::Index n, Eigen::Index k, double dof, int em_steps)
    : n_(n), k_(k), dof_(dof), em_steps_(em_steps) {
  if (n < 1 || k < 1 || !(dof > 0.0)) throw DomainError("mvt: need n >= 1, k >= 1, dof > 0");
  if (em_steps < 0) throw DomainError("mvt: em_steps must be >= 0");
  const double kk = static_cast<double>(k);
  log_c_ = std::lgamma(0.5 * (dof + kk)) - std::lgamma(0.5 * dof) -
           0.5 * kk * std::log(dof * std::numbers::pi) + 0.5 * (dof + kk) * std::log(dof);
  q75_ = boost::math::quantile(boost::math::students_t_distribution<double>(dof), 0.75);
}

bool MultivariateTModel::in_domain(const ParamVector& theta) const {
  if (theta.size() != symmetric_dim(k_) || !theta.allFinite()) return false;
  return min_eigenvalue(unflatten_symmetric(theta, k_)) > 1e-10;
}

double MultivariateTModel::boundary_distance(const ParamVector& theta) const {
  // A Frobenius ball of radius r around a PD matrix stays PD iff r < lambda_min.
  return min_eigenvalue(unflatten_symmetric(theta, k_));
}

std::unique_ptr<BoundModel> MultivariateTModel::bind(const ParamVector& theta) const {
  if (!in_domain(theta)) throw DomainError("mvt: precision must be positive definite");
  return std::make_unique<BoundMvt>(*this, theta, n_);
}

void MultivariateTModel::check_data(const Dataset& x) const {
  if (x.n() != n_ || x.k() != k_) throw DomainError("mvt: expected n x k data");
}

double kendall_tau(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  const Eigen::Index n = a.size();
  if (n < 2) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double p = (a[i] - a[j]) * (b[i] - b[j]);
      s += (p > 0.0) - (p < 0.0);
    }
  return s / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double median(Vec v) {
  if (v.size() == 0) throw DomainError("median of empty vector");
  auto* first = v.data();
  auto* last = first + v.size();
  auto* mid = first + v.size() / 2;
  std::nth_element(first, mid, last);
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(first, mid);
  return 0.5 * (lo + hi);
}

InitialEstimate MultivariateTModel::initial_estimate(const Dataset& x) const {
  check_data(x);
  Vec scale(k_);
  for (Eigen::Index j = 0; j < k_; ++j)
    scale[j] = std::max(median(x.obs.col(j).cwiseAbs()) / q75_, 1e-12);
  // Scatter diagonal is the squared marginal scale; off-diagonals from the
  // Kendall tau sine relation.
  Mat sigma(k_, k_);
  for (Eigen::Index j = 0; j < k_; ++j)
    for (Eigen::Index l = j; l < k_; ++l) {
      const double s =
          j == l ? 1.0 : std::sin(0.5 * std::numbers::pi * kendall_tau(x.obs.col(j), x.obs.col(l)));
      sigma(j, l) = sigma(l, j) = s * scale[j] * scale[l];
    }
  if (min_eigenvalue(sigma) > 1e-10) {
    const Mat refined = em_refine(x, sigma);
    ParamVector theta = flatten_symmetric(refined.inverse());
    if (in_domain(theta)) return {theta, false};
  }
  Mat diag = Mat::Zero(k_, k_);
  for (Eigen::Index j = 0; j < k_; ++j) diag(j, j) = 1.0 / (scale[j] * scale[j]);
  return {flatten_symmetric(diag), true};
}

Mat MultivariateTModel::em_refine(const Dataset& x, Mat sigma) const {
  // Fixed-point iteration for the known-dof t scatter matrix:
  //   Sigma <- (1/n) sum_i (dof + k) / (dof + x_i' Sigma^-1 x_i) x_i x_i'.
  const double kk = static_cast<double>(k_);
  const Mat& x0 = x.obs;
  for (int it = 0; it < em_steps_; ++it) {
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success) break;
    const Mat prec = llt.solve(Mat::Identity(k_, k_));
    const Vec q = (x0 * prec).cwiseProduct(x0).rowwise().sum();
    const Vec wgt = (dof_ + kk) / (dof_ + q.array());
    Mat next = x0.transpose() * (x0.array().colwise() * wgt.array()).matrix();
    next /= static_cast<double>(n_);
    if (!next.allFinite() || min_eigenvalue(next) <= 1e-10) break;
    sigma = 0.5 * (next + next.transpose());
  }
  return sigma;
}

}  // namespace acss
