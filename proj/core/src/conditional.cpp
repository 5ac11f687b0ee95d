#include "acss/conditional.hpp"

namespace acss {

CondDensityContext::CondDensityContext(const Model& model, const Regularizer& reg,
                                       ParamVector theta_hat, AcssConfig cfg)
    : model_(&model),
      reg_(&reg),
      theta_hat_(std::move(theta_hat)),
      cfg_(cfg),
      bound_(model.bind(theta_hat_)) {
  reg_value_ = reg.value(theta_hat_);
  reg_grad_ = reg.grad(theta_hat_);
  reg_hess_ = reg.hess(theta_hat_);
}

PointEval CondDensityContext::evaluate(const Dataset& x) const {
  PointEval e;
  e.deriv = bound_->evaluate(x, 2);
  e.grad = e.deriv.grad + reg_grad_;
  e.hess = e.deriv.hess + reg_hess_;
  e.hess = 0.5 * (e.hess + e.hess.transpose());
  if (!std::isfinite(e.deriv.value) || !e.grad.allFinite() || !e.hess.allFinite()) return e;

  Eigen::LLT<Mat> llt(e.hess);
  if (llt.info() != Eigen::Success) return e;
  const Vec diag = llt.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 1e-10) return e;
  e.hess_pd = true;
  const double d = static_cast<double>(theta_hat_.size());
  const double log_det = 2.0 * diag.array().log().sum();
  if (!std::isfinite(log_det)) throw NumericalError("conditional: log det not finite");
  e.log_density =
      -e.deriv.value - d * e.grad.squaredNorm() / (2.0 * cfg_.sigma * cfg_.sigma) + log_det;
  return e;
}

bool CondDensityContext::member(const Dataset& x, const PointEval& e) const {
  if (!e.hess_pd) return false;
  if (min_eigenvalue(e.hess) <= pd_threshold(e.hess, cfg_)) return false;
  if (model_->strictly_convex()) return true;
  try {
    const NoiseVector w_star = -e.grad / cfg_.sigma;
    const SsospEstimate re =
        solve_perturbed(*model_, *reg_, x, w_star, cfg_, WarmStart{theta_hat_, &e.deriv});
    if (!re.is_ssosp) return false;
    const double tol = cfg_.match_tol * std::max(1.0, theta_hat_.norm());
    return (re.theta_hat - theta_hat_).norm() <= tol;
  } catch (const std::exception&) {
    return false;
  }
}

double unnorm_log_density(const CondDensityContext& ctx, const Dataset& x) {
  const PointEval e = ctx.evaluate(x);
  if (!e.hess_pd || !ctx.member(x, e)) return -std::numeric_limits<double>::infinity();
  return e.log_density;
}

bool membership_check(const CondDensityContext& ctx, const Dataset& x) {
  try {
    return ctx.member(x, ctx.evaluate(x));
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace acss
