#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "acss/models.hpp"

namespace acss {

namespace {

// Derivatives use B = D o Sigma and C = D o D o Sigma:
//   d/dtheta Sigma^{-1}    = Sigma^{-1} B Sigma^{-1}
//   d2/dtheta2 Sigma^{-1}  = 2 Sigma^{-1} B Sigma^{-1} B Sigma^{-1} - Sigma^{-1} C Sigma^{-1}
//   d/dtheta log det       = -tr(Sigma^{-1} B)
//   d2/dtheta2 log det     = tr(Sigma^{-1} C) - tr((Sigma^{-1} B)^2)
class BoundSpatial final : public BoundModel {
 public:
  BoundSpatial(const SpatialModel& model, const ParamVector& theta) : BoundModel(theta) {
    const Mat& d = model.distances();
    const Mat sigma = model.covariance(theta[0]);
    llt_.compute(sigma);
    if (llt_.info() != Eigen::Success)
      throw NumericalError("spatial: covariance factorization failed");
    const Eigen::Index n = sigma.rows();
    factor_ = llt_.matrixL();
    log_det_ = 2.0 * factor_.diagonal().array().log().sum();
    // With W = L^{-1} B L^{-T}: tr(Sigma^{-1} B) = tr W, tr((Sigma^{-1} B)^2) = |W|_F^2.
    Mat linv = Mat::Identity(n, n);
    factor_.triangularView<Eigen::Lower>().solveInPlace(linv);
    inv_.noalias() = linv.transpose().triangularView<Eigen::Upper>() * linv;
    b_ = d.cwiseProduct(sigma);
    c_ = d.cwiseProduct(b_);
    Mat lb(n, n);
    lb.noalias() = linv.triangularView<Eigen::Lower>() * b_;
    Mat w(n, n);
    w.noalias() = lb * linv.transpose().triangularView<Eigen::Upper>();
    tr_inv_b_ = w.trace();
    tr_ibib_ = w.squaredNorm();
    tr_inv_c_ = inv_.cwiseProduct(c_).sum();
    constant_ = 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_;
  }

  Derivatives evaluate(const Dataset& x, int order) const override {
    const auto col = x.col();
    const Vec u = inv_ * col;
    Derivatives out;
    out.value = constant_ + 0.5 * col.dot(u);
    if (order >= 1) {
      const Vec bu = b_ * u;
      out.grad = Vec::Constant(1, 0.5 * u.dot(bu) - 0.5 * tr_inv_b_);
      if (order >= 2) {
        const double quad = bu.dot(inv_ * bu) - 0.5 * u.dot(c_ * u);
        out.hess = Mat::Constant(1, 1, quad + 0.5 * tr_inv_c_ - 0.5 * tr_ibib_);
      }
    }
    return out;
  }

  Dataset sample(Rng& rng) const override {
    return Dataset::scalars(factor_ * rng.normal_vector(factor_.rows()));
  }

 private:
  Eigen::LLT<Mat> llt_;
  Mat factor_, inv_, b_, c_;
  double log_det_ = 0, tr_inv_b_ = 0, tr_inv_c_ = 0, tr_ibib_ = 0, constant_ = 0;
};

}  // namespace

SpatialModel::SpatialModel(Mat distances, SpatialInit init) : d_(std::move(distances)), init_(init) {
  if (d_.rows() < 1 || d_.rows() != d_.cols()) throw DomainError("spatial: D must be square");
  if (!d_.allFinite() || (d_ - d_.transpose()).cwiseAbs().maxCoeff() > 0.0 ||
      d_.diagonal().cwiseAbs().maxCoeff() > 0.0 || d_.minCoeff() < 0.0)
    throw DomainError("spatial: D must be symmetric, nonnegative, zero on the diagonal");
  for (Eigen::Index i = 0; i < d_.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d_.cols(); ++j)
      if (std::abs(d_(i, j) - 1.0) < 1e-12) edges_.emplace_back(i, j);
  if (init_ == SpatialInit::ProfileGrid) {
    auto grid = std::make_shared<Grid>();
    const Eigen::Index n = d_.rows();
    const double lo = std::log(kGridMin), hi = std::log(kGridMax);
    for (int g = 0; g < kGridSize; ++g) {
      const double u = lo + (hi - lo) * g / (kGridSize - 1);
      Eigen::LLT<Mat> llt(covariance(std::exp(u)));
      if (llt.info() != Eigen::Success) continue;
      const Mat l = llt.matrixL();
      grid->log_theta.push_back(u);
      grid->log_det.push_back(2.0 * l.diagonal().array().log().sum());
      grid->inverse.push_back(llt.solve(Mat::Identity(n, n)));
    }
    if (grid->log_theta.size() < 3) throw NumericalError("spatial: covariance grid not PD");
    grid_ = std::move(grid);
  }
}

Mat SpatialModel::lattice_coordinates(int side, int dims) {
  Eigen::Index n = 1;
  for (int k = 0; k < dims; ++k) n *= side;
  Mat z(n, dims);
  for (Eigen::Index p = 0; p < n; ++p) {
    Eigen::Index rem = p;
    for (int k = dims - 1; k >= 0; --k) {
      z(p, k) = static_cast<double>(rem % side + 1);
      rem /= side;
    }
  }
  return z;
}

SpatialModel SpatialModel::lattice(int side, int dims, SpatialInit init) {
  if (side < 1 || dims < 1) throw DomainError("spatial: lattice needs side >= 1, dims >= 1");
  const Mat z = lattice_coordinates(side, dims);
  const Eigen::Index n = z.rows();
  Mat d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (z.row(i) - z.row(j)).norm();
  return SpatialModel(std::move(d), init);
}

Mat SpatialModel::covariance(double theta) const { return (-theta * d_.array()).exp().matrix(); }

bool SpatialModel::in_domain(const ParamVector& theta) const {
  return theta.size() == 1 && std::isfinite(theta[0]) && theta[0] > 0.0;
}

double SpatialModel::boundary_distance(const ParamVector& theta) const { return theta[0]; }

std::unique_ptr<BoundModel> SpatialModel::bind(const ParamVector& theta) const {
  if (!in_domain(theta)) throw DomainError("spatial: theta must be positive");
  return std::make_unique<BoundSpatial>(*this, theta);
}

void SpatialModel::check_data(const Dataset& x) const {
  if (x.n() != d_.rows() || x.k() != 1) throw DomainError("spatial: expected n x 1 data");
}

InitialEstimate SpatialModel::initial_estimate(const Dataset& x) const {
  return init_ == SpatialInit::ProfileGrid ? grid_estimate(x) : neighbour_estimate(x);
}

InitialEstimate SpatialModel::neighbour_estimate(const Dataset& x) const {
  check_data(x);
  if (edges_.empty()) return {Vec::Constant(1, kFallbackTheta), true};
  double s = 0.0;
  for (const auto& [i, j] : edges_) s += x.obs(i, 0) * x.obs(j, 0);
  const double avg = s / static_cast<double>(edges_.size());
  if (!(avg > 0.0) || !(avg < 1.0)) return {Vec::Constant(1, kFallbackTheta), true};
  return {Vec::Constant(1, -std::log(avg)), false};
}

InitialEstimate SpatialModel::grid_estimate(const Dataset& x) const {
  check_data(x);
  if (!grid_) throw UnsupportedOperation("spatial: model built without a likelihood grid");
  const auto col = x.col();
  const Grid& g = *grid_;
  const std::size_t k = g.log_theta.size();
  // Coarse pass over every third grid point, then the neighbourhood of its minimum.
  std::vector<double> v(k, std::numeric_limits<double>::infinity());
  const auto at = [&](std::size_t i) {
    if (!std::isfinite(v[i])) v[i] = g.log_det[i] + col.dot(g.inverse[i] * col);
    return v[i];
  };
  std::size_t coarse = 0;
  for (std::size_t i = 0; i < k; i += 3)
    if (at(i) < at(coarse)) coarse = i;
  const std::size_t lo = coarse >= 3 ? coarse - 3 : 0, hi = std::min(k - 1, coarse + 3);
  std::size_t best = coarse;
  for (std::size_t i = lo; i <= hi; ++i)
    if (at(i) < at(best)) best = i;
  if (best > 0) at(best - 1);
  if (best + 1 < k) at(best + 1);
  if (best == 0 || best + 1 == k) return {Vec::Constant(1, std::exp(g.log_theta[best])), true};
  // Vertex of the parabola through the three points around the minimum.
  const double u0 = g.log_theta[best - 1], u1 = g.log_theta[best], u2 = g.log_theta[best + 1];
  const double a = v[best - 1], b = v[best], c = v[best + 1];
  const double den = (u1 - u0) * (b - c) - (u1 - u2) * (b - a);
  double u = u1;
  if (den != 0.0) {
    u = u1 - 0.5 * ((u1 - u0) * (u1 - u0) * (b - c) - (u1 - u2) * (u1 - u2) * (b - a)) / den;
    u = std::clamp(u, u0, u2);
  }
  return {Vec::Constant(1, std::exp(u)), false};
}

}  // namespace acss
