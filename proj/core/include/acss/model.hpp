#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>

#include "acss/rng.hpp"
#include "acss/types.hpp"

namespace acss {

enum class ProposalFamily { SubsetResample, ArMixing };

/// A model with its parameter held fixed. Everything that depends only on
/// theta (factorizations, inverse covariances, x-free Hessians) is computed
/// once at construction, so repeated evaluation over many datasets, as in a
/// Markov chain targeting the conditional law given theta-hat, is cheap.
class BoundModel {
 public:
  virtual ~BoundModel() = default;

  /// Negative log-likelihood and, for order >= 1 / >= 2, its gradient and
  /// Hessian with respect to theta.
  [[nodiscard]] virtual Derivatives evaluate(const Dataset& x, int order) const = 0;

  [[nodiscard]] double neg_loglik(const Dataset& x) const { return evaluate(x, 0).value; }

  /// Forward draw from P_theta.
  [[nodiscard]] virtual Dataset sample(Rng& rng) const = 0;

  /// log f^(i)(x_i; theta) for independent-observation models.
  [[nodiscard]] virtual double obs_log_density(const Dataset& x, Eigen::Index i) const;

  /// Redraw the listed observations of x from their marginal laws under theta.
  virtual void redraw(Dataset& x, std::span<const Eigen::Index> rows, Rng& rng) const;

  [[nodiscard]] const ParamVector& theta() const { return theta_; }

 protected:
  explicit BoundModel(ParamVector theta) : theta_(std::move(theta)) {}

 private:
  ParamVector theta_;
};

struct InitialEstimate {
  ParamVector theta;
  bool fallback = false;  // the estimator's primary formula was undefined
};

class Regularizer;

/// Capability interface for a parametric null model {P_theta}.
class Model {
 public:
  virtual ~Model() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual bool in_domain(const ParamVector& theta) const = 0;

  /// Euclidean distance from theta to the boundary of the parameter set
  /// (infinity when the set is all of R^d).
  [[nodiscard]] virtual double boundary_distance(const ParamVector& theta) const {
    (void)theta;
    return std::numeric_limits<double>::infinity();
  }

  /// Throws DomainError if theta is outside the open parameter set.
  [[nodiscard]] virtual std::unique_ptr<BoundModel> bind(const ParamVector& theta) const = 0;

  /// Throws DomainError if x does not have the shape this model expects.
  virtual void check_data(const Dataset& x) const = 0;

  [[nodiscard]] virtual InitialEstimate initial_estimate(const Dataset& x) const = 0;

  [[nodiscard]] virtual ProposalFamily proposal_family() const {
    return ProposalFamily::SubsetResample;
  }

  /// True when -log f is strictly convex on all of Theta = R^d. The
  /// estimator then runs unconstrained and support membership reduces to the
  /// Hessian check.
  [[nodiscard]] virtual bool strictly_convex() const { return false; }

  /// Exact draw from the plug-in conditional law given theta-hat. Only
  /// models with a closed-form conditional implement this.
  [[nodiscard]] virtual Dataset sample_exact_conditional(const ParamVector& theta_hat,
                                                         const Regularizer& reg,
                                                         double sigma, Rng& rng) const;

  [[nodiscard]] double neg_loglik(const ParamVector& theta, const Dataset& x) const;
  [[nodiscard]] Vec grad_neg_loglik(const ParamVector& theta, const Dataset& x) const;
  [[nodiscard]] Mat hess_neg_loglik(const ParamVector& theta, const Dataset& x) const;
  [[nodiscard]] Dataset sample_data(const ParamVector& theta, Rng& rng) const;
  void resample_block(const ParamVector& theta, Dataset& x,
                      std::span<const Eigen::Index> rows, Rng& rng) const;
};

class Regularizer {
 public:
  virtual ~Regularizer() = default;
  [[nodiscard]] virtual double value(const ParamVector& theta) const = 0;
  [[nodiscard]] virtual Vec grad(const ParamVector& theta) const = 0;
  [[nodiscard]] virtual Mat hess(const ParamVector& theta) const = 0;
  [[nodiscard]] virtual bool is_zero() const { return false; }
};

class ZeroRegularizer final : public Regularizer {
 public:
  double value(const ParamVector&) const override { return 0.0; }
  Vec grad(const ParamVector& t) const override { return Vec::Zero(t.size()); }
  Mat hess(const ParamVector& t) const override { return Mat::Zero(t.size(), t.size()); }
  bool is_zero() const override { return true; }
};

/// (lambda / 2) * ||theta - center||^2
class RidgeRegularizer final : public Regularizer {
 public:
  RidgeRegularizer(double lambda, ParamVector center)
      : lambda_(lambda), center_(std::move(center)) {}
  double value(const ParamVector& t) const override {
    return 0.5 * lambda_ * (t - center_).squaredNorm();
  }
  Vec grad(const ParamVector& t) const override { return lambda_ * (t - center_); }
  Mat hess(const ParamVector& t) const override {
    return lambda_ * Mat::Identity(t.size(), t.size());
  }

 private:
  double lambda_;
  ParamVector center_;
};

const Regularizer& zero_regularizer();

// Penalized, perturbed objective L(theta; x, w) = -log f(x; theta) + R(theta)
// + sigma * <w, theta>. The Hessian does not depend on w.
double penalized_objective(const Model& model, const Regularizer& reg,
                           const ParamVector& theta, const Dataset& x,
                           const NoiseVector& w, double sigma);
Vec grad_penalized_objective(const Model& model, const Regularizer& reg,
                             const ParamVector& theta, const Dataset& x,
                             const NoiseVector& w, double sigma);
Mat hess_penalized_objective(const Model& model, const Regularizer& reg,
                             const ParamVector& theta, const Dataset& x);

/// Upper triangle (row-major) of a symmetric matrix, off-diagonals times sqrt(2).
Vec flatten_symmetric(const Mat& m);
Mat unflatten_symmetric(const Vec& v, Eigen::Index k);
constexpr Eigen::Index symmetric_dim(Eigen::Index k) { return k * (k + 1) / 2; }

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& m);

}  // namespace acss
