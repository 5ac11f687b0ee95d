#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace acss {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A point of the parameter set, flattened to a d-vector.
/// Symmetric-matrix parameters store the upper triangle row-major, with
/// off-diagonal entries scaled by sqrt(2) so the Euclidean norm of the
/// vector equals the Frobenius norm of the matrix.
using ParamVector = Vec;

/// One draw of the perturbation W ~ N(0, I_d / d).
using NoiseVector = Vec;

/// Observed data: n rows, one per observation, k columns (k = 1 for scalar
/// observations). Side information lives in the model, not here.
struct Dataset {
  Mat obs;

  Dataset() = default;
  explicit Dataset(Mat m) : obs(std::move(m)) {}
  static Dataset scalars(const Vec& v) { return Dataset(Mat(v)); }

  [[nodiscard]] Eigen::Index n() const { return obs.rows(); }
  [[nodiscard]] Eigen::Index k() const { return obs.cols(); }
  [[nodiscard]] auto col() const { return obs.col(0); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.obs.rows() == b.obs.rows() && a.obs.cols() == b.obs.cols() &&
           a.obs == b.obs;
  }
};

/// Value and derivatives of the negative log-likelihood at a fixed point.
struct Derivatives {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

// Error types. Rejected input (domain violations, shape mismatches) is a
// DomainError; failures inside a factorization that passed its checks are
// NumericalError; config problems are ConfigError.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace acss
