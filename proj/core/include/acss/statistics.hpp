#pragma once

#include <memory>
#include <string>
#include <vector>

#include "acss/model.hpp"

namespace acss {

/// T(x). Larger values are evidence against the null. Implementations are
/// deterministic functions of the data plus fixed side information.
class TestStatistic {
 public:
  virtual ~TestStatistic() = default;
  [[nodiscard]] virtual double evaluate(const Dataset& x) const = 0;
  [[nodiscard]] virtual std::string id() const = 0;
};

/// |coefficient on x| when y is regressed by least squares on the columns
/// [x, Z] (no intercept).
class OlsCoefficientStatistic final : public TestStatistic {
 public:
  OlsCoefficientStatistic(Vec response, Mat covariates);
  double evaluate(const Dataset& x) const override;
  std::string id() const override { return "ols-abs-coef"; }

 private:
  Vec y_;
  Mat z_;
};

/// |mean(group 1) - mean(group 0)| for pooled two-sample data.
class MeanDifferenceStatistic final : public TestStatistic {
 public:
  MeanDifferenceStatistic(Eigen::Index n0, Eigen::Index n1) : n0_(n0), n1_(n1) {}
  double evaluate(const Dataset& x) const override;
  std::string id() const override { return "abs-mean-diff"; }

 private:
  Eigen::Index n0_, n1_;
};

/// sum over horizontal neighbour pairs of x_i x_j minus the same sum over
/// vertical pairs, on a side x side lattice ordered as
/// SpatialModel::lattice(). Each unordered pair counts once.
class AnisotropyStatistic final : public TestStatistic {
 public:
  explicit AnisotropyStatistic(int side);
  double evaluate(const Dataset& x) const override;
  std::string id() const override { return "anisotropy"; }

 private:
  std::vector<std::pair<Eigen::Index, Eigen::Index>> horizontal_, vertical_;
};

/// (sum_i |x_i|^2)^2 / sum_i |x_i|^4 over the rows of x.
class TailRatioStatistic final : public TestStatistic {
 public:
  double evaluate(const Dataset& x) const override;
  std::string id() const override { return "tail-ratio"; }
};

/// Standardized fourth moment of the residuals x_i - mean(x) of scalar
/// data; invariant to location shifts.
class ResidualKurtosisStatistic final : public TestStatistic {
 public:
  double evaluate(const Dataset& x) const override;
  std::string id() const override { return "residual-kurtosis"; }
};

}  // namespace acss
