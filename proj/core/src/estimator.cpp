#include "acss/estimator.hpp"

#include <limits>

namespace acss {

NoiseVector draw_noise(int d, Rng& rng) {
  if (d < 1) throw DomainError("draw_noise: d must be >= 1");
  return rng.normal_vector(d) / std::sqrt(static_cast<double>(d));
}

double pd_threshold(const Mat& h, const AcssConfig& cfg) { return cfg.eig_tol * (1.0 + h.norm()); }

namespace {

struct Objective {
  const Model& model;
  const Regularizer& reg;
  const Dataset& x;
  const NoiseVector& w;
  double sigma;

  // Unperturbed penalized derivatives (-log f + R); the caller adds sigma w.
  std::optional<Derivatives> penalized(const ParamVector& theta, int order) const {
    if (!model.in_domain(theta)) return std::nullopt;
    try {
      Derivatives d = model.bind(theta)->evaluate(x, order);
      return add_reg(std::move(d), theta, order);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  Derivatives add_reg(Derivatives d, const ParamVector& theta, int order) const {
    if (reg.is_zero()) return d;
    d.value += reg.value(theta);
    if (order >= 1) d.grad += reg.grad(theta);
    if (order >= 2) d.hess += reg.hess(theta);
    return d;
  }

  double perturbed_value(const Derivatives& d, const ParamVector& theta) const {
    return d.value + sigma * w.dot(theta);
  }
};

bool finite(const Derivatives& d) {
  return std::isfinite(d.value) && d.grad.allFinite() && d.hess.allFinite();
}

// Newton direction, adding Levenberg damping lambda I (doubling from 1e-6)
// until the shifted Hessian factors.
Vec newton_direction(const Mat& h, const Vec& g) {
  const Eigen::Index d = h.rows();
  Eigen::LLT<Mat> llt(h);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)
    return llt.solve(-g);
  for (double lambda = 1e-6; lambda < 1e300; lambda *= 2.0) {
    llt.compute(h + lambda * Mat::Identity(d, d));
    if (llt.info() == Eigen::Success) return llt.solve(-g);
  }
  return -g;
}

}  // namespace

SsospEstimate solve_perturbed(const Model& model, const Regularizer& reg, const Dataset& x,
                              const NoiseVector& w, const AcssConfig& cfg,
                              const std::optional<WarmStart>& warm) {
  model.check_data(x);
  if (w.size() != model.dim()) throw DomainError("solve_perturbed: noise has wrong dimension");
  SsospEstimate out;
  out.w = w;
  if (cfg.max_iter <= 0) {
    out.diagnostic = "solver disabled";
    return out;
  }

  const Objective obj{model, reg, x, w, cfg.sigma};
  const InitialEstimate init = model.initial_estimate(x);
  out.init_fallback = init.fallback;
  const ParamVector& center = init.theta;
  const bool constrained = !model.strictly_convex();
  double radius = std::numeric_limits<double>::infinity();
  if (constrained) {
    radius = std::min(cfg.init_radius(x.n()), model.boundary_distance(center) - 1e-8);
    if (!(radius > 0.0)) {
      out.theta_hat = center;
      out.diagnostic = "initial estimate too close to the boundary of the parameter set";
      return out;
    }
  }
  out.radius = radius;

  const auto project = [&](ParamVector t) {
    if (!constrained) return t;
    const double dist = (t - center).norm();
    if (dist > radius) t = center + (t - center) * (radius / dist);
    return t;
  };
  const auto at_boundary = [&](const ParamVector& t) {
    return constrained && (t - center).norm() >= radius * (1.0 - cfg.boundary_tol);
  };

  ParamVector theta = warm ? project(warm->theta) : center;
  std::optional<Derivatives> cur;
  if (warm && warm->derivatives != nullptr && theta == warm->theta)
    cur = obj.add_reg(*warm->derivatives, theta, 2);
  else
    cur = obj.penalized(theta, 2);
  if (!cur || !finite(*cur)) {
    out.theta_hat = theta;
    out.diagnostic = "objective not finite at the starting point";
    return out;
  }
  const double tol = cfg.grad_tol * std::max(1.0, cur->grad.norm());

  bool converged = false;
  bool stalled = false;
  int iter = 0;
  for (;; ++iter) {
    const Vec g = cur->grad + cfg.sigma * w;
    out.grad_norm = g.norm();
    if (out.grad_norm <= tol) {
      converged = true;
      break;
    }
    if (iter >= cfg.max_iter) break;

    const Vec dir = newton_direction(cur->hess, g);
    const double f0 = obj.perturbed_value(*cur, theta);
    bool moved = false;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const ParamVector trial = project(theta + t * dir);
      const Vec delta = trial - theta;
      if (delta.norm() <= 1e-15 * (1.0 + theta.norm())) break;
      auto next = obj.penalized(trial, 2);
      if (!next || !finite(*next)) continue;
      const double f1 = obj.perturbed_value(*next, trial);
      // Near the optimum the predicted decrease drops below rounding error
      // in f; then a step that does not increase f beyond that noise and
      // shrinks the gradient is taken.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));
      const bool armijo = f1 <= f0 + 1e-4 * g.dot(delta);
      const bool noisy_descent =
          f1 <= f0 + noise && (next->grad + cfg.sigma * w).norm() < out.grad_norm;
      if (armijo || noisy_descent) {
        theta = trial;
        cur = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) {
      stalled = true;
      break;
    }
  }

  out.theta_hat = theta;
  out.iterations = iter;
  out.active_at_boundary = at_boundary(theta);
  out.min_hess_eig = min_eigenvalue(cur->hess);
  const bool pd = out.min_hess_eig > pd_threshold(cur->hess, cfg);
  out.is_ssosp = converged && pd && !out.active_at_boundary;
  if (!out.is_ssosp) {
    if (out.active_at_boundary)
      out.diagnostic = "iterate at the boundary of the search ball";
    else if (!converged)
      out.diagnostic = stalled ? "line search stalled" : "iteration limit reached";
    else
      out.diagnostic = "Hessian not positive definite";
  }
  return out;
}

bool verify_ssosp(const Model& model, const Regularizer& reg, const ParamVector& theta,
                  const Dataset& x, const NoiseVector& w, double sigma, const AcssConfig& cfg) {
  if (!model.in_domain(theta)) return false;
  const ParamVector ref = model.initial_estimate(x).theta;
  double scale = 1.0;
  if (model.in_domain(ref)) {
    const Vec gref = model.bind(ref)->evaluate(x, 1).grad + reg.grad(ref);
    if (gref.allFinite()) scale = std::max(1.0, gref.norm());
  }
  const Derivatives d = model.bind(theta)->evaluate(x, 2);
  const Vec g = d.grad + reg.grad(theta) + sigma * w;
  const Mat h = d.hess + reg.hess(theta);
  if (!g.allFinite() || !h.allFinite()) return false;
  return g.norm() <= cfg.grad_tol * scale && min_eigenvalue(h) > pd_threshold(h, cfg);
}

}  // namespace acss
