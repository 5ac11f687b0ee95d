#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "acss/model.hpp"

namespace acss {

struct AcssConfig {
  double sigma = 1.0;           // perturbation level
  double grad_tol = 1e-8;       // relative to max(1, |grad L(start; x)|)
  int max_iter = 100;           // Newton iterations; 0 disables the solver
  double radius_scale = 1.0;    // r_init(x) = radius_scale * n^radius_exponent
  double radius_exponent = -0.25;
  double eig_tol = 1e-10;       // relative to 1 + |Hessian|
  double boundary_tol = 1e-6;   // relative to the ball radius
  double match_tol = 1e-6;      // relative, for re-solve equality in membership

  [[nodiscard]] double init_radius(Eigen::Index n) const {
    return radius_scale * std::pow(static_cast<double>(n), radius_exponent);
  }
};

struct SsospEstimate {
  ParamVector theta_hat;
  NoiseVector w;
  bool is_ssosp = false;
  double grad_norm = NAN;
  double min_hess_eig = NAN;
  int iterations = 0;
  bool active_at_boundary = false;
  bool init_fallback = false;
  double radius = NAN;
  std::string diagnostic;
};

/// W ~ N(0, I_d / d).
NoiseVector draw_noise(int d, Rng& rng);

/// Starting point for a re-solve, with the unpenalized -log f derivatives
/// there if already known.
struct WarmStart {
  ParamVector theta;
  const Derivatives* derivatives = nullptr;
};

/// Damped Newton on L(theta; x, w) = -log f + R + sigma <w, theta>, confined
/// to the ball of radius r_init(x) around the initial estimate (capped to
/// stay inside Theta). Strictly convex models on R^d run unconstrained.
/// Never throws for numerical trouble; failures come back as is_ssosp=false.
SsospEstimate solve_perturbed(const Model& model, const Regularizer& reg, const Dataset& x,
                              const NoiseVector& w, const AcssConfig& cfg,
                              const std::optional<WarmStart>& warm = std::nullopt);

/// |grad L(theta; x) + sigma w| <= grad_tol * max(1, |grad L(theta_init(x); x)|)
/// and the Hessian's smallest eigenvalue clears eig_tol.
bool verify_ssosp(const Model& model, const Regularizer& reg, const ParamVector& theta,
                  const Dataset& x, const NoiseVector& w, double sigma, const AcssConfig& cfg);

/// Shared eigenvalue threshold for positive-definiteness decisions.
double pd_threshold(const Mat& h, const AcssConfig& cfg);

}  // namespace acss
