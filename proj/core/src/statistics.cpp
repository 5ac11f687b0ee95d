#include "acss/statistics.hpp"

#include "acss/models.hpp"

namespace acss {

OlsCoefficientStatistic::OlsCoefficientStatistic(Vec response, Mat covariates)
    : y_(std::move(response)), z_(std::move(covariates)) {
  if (y_.size() != z_.rows()) throw DomainError("ols statistic: y and Z row counts differ");
}

double OlsCoefficientStatistic::evaluate(const Dataset& x) const {
  if (x.n() != y_.size() || x.k() != 1) throw DomainError("ols statistic: data shape mismatch");
  Mat design(z_.rows(), z_.cols() + 1);
  design.col(0) = x.col();
  design.rightCols(z_.cols()) = z_;
  Eigen::ColPivHouseholderQR<Mat> qr(design);
  if (qr.rank() < design.cols()) throw NumericalError("ols statistic: singular design");
  return std::abs(qr.solve(y_)[0]);
}

double MeanDifferenceStatistic::evaluate(const Dataset& x) const {
  if (x.n() != n0_ + n1_ || x.k() != 1) throw DomainError("mean difference: data shape mismatch");
  return std::abs(x.col().tail(n1_).mean() - x.col().head(n0_).mean());
}

AnisotropyStatistic::AnisotropyStatistic(int side) {
  const Mat z = SpatialModel::lattice_coordinates(side, 2);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) {
      const double da = std::abs(z(i, 0) - z(j, 0));
      const double db = std::abs(z(i, 1) - z(j, 1));
      if (da == 1.0 && db == 0.0) horizontal_.emplace_back(i, j);
      if (da == 0.0 && db == 1.0) vertical_.emplace_back(i, j);
    }
}

double AnisotropyStatistic::evaluate(const Dataset& x) const {
  double t = 0.0;
  for (const auto& [i, j] : horizontal_) t += x.obs(i, 0) * x.obs(j, 0);
  for (const auto& [i, j] : vertical_) t -= x.obs(i, 0) * x.obs(j, 0);
  return t;
}

double TailRatioStatistic::evaluate(const Dataset& x) const {
  const Vec sq = x.obs.rowwise().squaredNorm();
  const double s2 = sq.squaredNorm();
  if (!(s2 > 0.0)) throw NumericalError("tail ratio: all observations are zero");
  return sq.sum() * sq.sum() / s2;
}

double ResidualKurtosisStatistic::evaluate(const Dataset& x) const {
  const auto col = x.col();
  const Eigen::ArrayXd r = col.array() - col.mean();
  const double m2 = r.square().mean();
  if (!(m2 > 0.0)) throw NumericalError("kurtosis: constant data");
  return r.square().square().mean() / (m2 * m2);
}

}  // namespace acss
