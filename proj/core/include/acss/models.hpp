#pragma once

#include <utility>
#include <vector>

#include "acss/model.hpp"

namespace acss {

/// X_1..X_n iid N(theta, 1). Test fixture with a closed-form estimator and
/// conditional law. The (n/2) log(2 pi) constant is omitted from -log f.
class GaussianMeanModel final : public Model {
 public:
  explicit GaussianMeanModel(Eigen::Index n);

  std::string name() const override { return "gaussian-mean"; }
  int dim() const override { return 1; }
  bool in_domain(const ParamVector& theta) const override;
  std::unique_ptr<BoundModel> bind(const ParamVector& theta) const override;
  void check_data(const Dataset& x) const override;
  InitialEstimate initial_estimate(const Dataset& x) const override;
  bool strictly_convex() const override { return true; }
  Dataset sample_exact_conditional(const ParamVector& theta_hat, const Regularizer& reg,
                                   double sigma, Rng& rng) const override;

  Eigen::Index n() const { return n_; }

 private:
  Eigen::Index n_;
};

enum class GlmPartition { Logistic, Poisson };

/// Canonical GLM: f(x; theta) = exp{x' Z theta - sum_i a(Z_i' theta)} with
/// respect to counting measure (Poisson includes the 1/x! base measure).
class GlmModel final : public Model {
 public:
  GlmModel(Mat covariates, GlmPartition partition);

  std::string name() const override;
  int dim() const override { return static_cast<int>(z_.cols()); }
  bool in_domain(const ParamVector& theta) const override;
  std::unique_ptr<BoundModel> bind(const ParamVector& theta) const override;
  void check_data(const Dataset& x) const override;
  /// Unpenalized MLE by damped Newton from zero.
  InitialEstimate initial_estimate(const Dataset& x) const override;
  bool strictly_convex() const override { return true; }

  const Mat& covariates() const { return z_; }
  GlmPartition partition() const { return partition_; }

  // Partition function and its first two derivatives.
  double a(double eta) const;
  double a1(double eta) const;
  double a2(double eta) const;

 private:
  Mat z_;
  GlmPartition partition_;
};

/// Two independent Gaussian samples with a common mean and separate
/// variances; theta = (mu, gamma0, gamma1). Observations are pooled into
/// one column: the first n0 rows are group 0, the next n1 group 1.
class BehrensFisherModel final : public Model {
 public:
  BehrensFisherModel(Eigen::Index n0, Eigen::Index n1);

  std::string name() const override { return "behrens-fisher"; }
  int dim() const override { return 3; }
  bool in_domain(const ParamVector& theta) const override;
  double boundary_distance(const ParamVector& theta) const override;
  std::unique_ptr<BoundModel> bind(const ParamVector& theta) const override;
  void check_data(const Dataset& x) const override;
  /// Pooled moments refined by precision-weighted fixed-point steps; falls
  /// back to the pooled moments, variances clamped to kVarianceFloor, when a
  /// group is degenerate.
  InitialEstimate initial_estimate(const Dataset& x) const override;

  Eigen::Index n0() const { return n0_; }
  Eigen::Index n1() const { return n1_; }

  static constexpr double kVarianceFloor = 1e-8;

 private:
  Eigen::Index n0_, n1_;
};

enum class SpatialInit {
  NeighbourProducts,  // -log of the average of x_i x_j over unit-distance pairs
  ProfileGrid,        // likelihood maximized over a fixed log-spaced grid, then a parabolic step
};

/// Zero-mean Gaussian field with covariance exp(-theta * D_ij).
class SpatialModel final : public Model {
 public:
  explicit SpatialModel(Mat distances, SpatialInit init = SpatialInit::ProfileGrid);

  /// Integer lattice {1..side}^dims with Euclidean distances; points are
  /// ordered with the first coordinate varying slowest.
  static SpatialModel lattice(int side, int dims = 2, SpatialInit init = SpatialInit::ProfileGrid);
  /// Coordinates of the lattice points, one row per point.
  static Mat lattice_coordinates(int side, int dims);

  std::string name() const override { return "spatial"; }
  int dim() const override { return 1; }
  bool in_domain(const ParamVector& theta) const override;
  double boundary_distance(const ParamVector& theta) const override;
  std::unique_ptr<BoundModel> bind(const ParamVector& theta) const override;
  void check_data(const Dataset& x) const override;
  /// Per the init mode. Neighbour products fall back to kFallbackTheta when
  /// the average is not in (0, 1); the grid falls back to its end point
  /// when the maximum is on the edge of the grid.
  InitialEstimate initial_estimate(const Dataset& x) const override;
  ProposalFamily proposal_family() const override { return ProposalFamily::ArMixing; }

  InitialEstimate neighbour_estimate(const Dataset& x) const;
  InitialEstimate grid_estimate(const Dataset& x) const;

  const Mat& distances() const { return d_; }
  /// Unordered pairs (i < j) at distance exactly 1.
  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& unit_pairs() const {
    return edges_;
  }
  Mat covariance(double theta) const;

  static constexpr double kFallbackTheta = 1.0;
  static constexpr double kGridMin = 0.01, kGridMax = 10.0;
  static constexpr int kGridSize = 40;

 private:
  struct Grid {
    std::vector<double> log_theta;
    std::vector<Mat> inverse;
    std::vector<double> log_det;
  };

  Mat d_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges_;
  SpatialInit init_;
  std::shared_ptr<const Grid> grid_;
};

/// n iid zero-mean multivariate t vectors with known degrees of freedom and
/// unknown k x k precision matrix theta (flattened, see ParamVector).
class MultivariateTModel final : public Model {
 public:
  MultivariateTModel(Eigen::Index n, Eigen::Index k, double dof, int em_steps = kDefaultEmSteps);

  std::string name() const override { return "mvt"; }
  int dim() const override { return static_cast<int>(symmetric_dim(k_)); }
  bool in_domain(const ParamVector& theta) const override;
  double boundary_distance(const ParamVector& theta) const override;
  std::unique_ptr<BoundModel> bind(const ParamVector& theta) const override;
  void check_data(const Dataset& x) const override;
  /// Kendall-tau correlation scaled by median-based marginal scales, refined
  /// by em_steps fixed-point iterations toward the scatter MLE, then
  /// inverted. Falls back to the diagonal when that matrix is not PD.
  InitialEstimate initial_estimate(const Dataset& x) const override;

  Eigen::Index k() const { return k_; }
  double dof() const { return dof_; }
  /// log c_{k,gamma} in f = c det(theta)^{1/2} (gamma + x' theta x)^{-(gamma+k)/2}.
  double log_normalizer() const { return log_c_; }
  /// 0.75-quantile of the univariate t with `dof` degrees of freedom.
  double t_upper_quartile() const { return q75_; }

  static constexpr int kDefaultEmSteps = 10;

 private:
  Mat em_refine(const Dataset& x, Mat sigma) const;

  Eigen::Index n_, k_;
  double dof_;
  int em_steps_;
  double log_c_;
  double q75_;
};

/// Kendall's tau between two columns, O(n^2) pairwise definition.
double kendall_tau(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b);

double median(Vec v);

}  // namespace acss
