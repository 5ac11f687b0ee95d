#pragma once

#include <limits>
#include <memory>

#include "acss/estimator.hpp"

namespace acss {

/// Derivatives of L(theta-hat; x) = -log f + R at one dataset, plus the
/// plug-in log density without the support indicator.
struct PointEval {
  Derivatives deriv;   // -log f only (no penalty), as returned by the bound model
  Vec grad;            // penalized gradient
  Mat hess;            // penalized Hessian
  bool hess_pd = false;
  double log_density = -std::numeric_limits<double>::infinity();
};

/// The estimated conditional law of X given theta-hat:
///   log f(x; th) - d |grad L(th; x)|^2 / (2 sigma^2) + log det Hess L(th; x),
/// restricted to datasets whose re-solve returns th.
/// Holds the model bound at theta-hat; read-only after construction.
class CondDensityContext {
 public:
  CondDensityContext(const Model& model, const Regularizer& reg, ParamVector theta_hat,
                     AcssConfig cfg);

  [[nodiscard]] PointEval evaluate(const Dataset& x) const;
  /// Support indicator, reusing derivatives already computed for x.
  [[nodiscard]] bool member(const Dataset& x, const PointEval& e) const;

  [[nodiscard]] const Model& model() const { return *model_; }
  [[nodiscard]] const Regularizer& reg() const { return *reg_; }
  [[nodiscard]] const BoundModel& bound() const { return *bound_; }
  [[nodiscard]] const ParamVector& theta_hat() const { return theta_hat_; }
  [[nodiscard]] const AcssConfig& config() const { return cfg_; }
  [[nodiscard]] double sigma() const { return cfg_.sigma; }

 private:
  const Model* model_;
  const Regularizer* reg_;
  ParamVector theta_hat_;
  AcssConfig cfg_;
  std::shared_ptr<const BoundModel> bound_;
  double reg_value_ = 0.0;
  Vec reg_grad_;
  Mat reg_hess_;
};

/// -infinity outside the support or where the Hessian is not PD.
double unnorm_log_density(const CondDensityContext& ctx, const Dataset& x);

/// Hessian PD at theta-hat and, unless the model is strictly convex, the
/// warm-started re-solve at w* = -grad L(theta-hat; x) / sigma returns
/// theta-hat as an SSOSP (within match_tol).
bool membership_check(const CondDensityContext& ctx, const Dataset& x);

}  // namespace acss
