#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "acss/types.hpp"

namespace acss {

/// splitmix64 finalizer; used for seed derivation and stream splitting.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a root seed with a tuple of counters into an independent stream
/// seed. Order matters: derive(s, {a, b}) != derive(s, {b, a}).
std::uint64_t derive_seed(std::uint64_t root,
                          std::initializer_list<std::uint64_t> counters);

/// Explicitly passed random source. Not thread-safe; split() hands out
/// child streams for concurrent work.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)), seed_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double chi_squared(double dof) {
    return std::chi_squared_distribution<double>(dof)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  int poisson(double mean) { return std::poisson_distribution<int>(mean)(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Vec normal_vector(Eigen::Index n);

  /// Uniformly random subset of {0..n-1} of the given size, in increasing order.
  std::vector<Eigen::Index> subset(Eigen::Index n, Eigen::Index size);

  /// Uniformly random permutation of {0..n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Child stream; consumes one draw from this stream.
  Rng split() { return Rng(mix64(engine_() ^ 0xa0761d6478bd642fULL)); }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t seed_;
};

}  // namespace acss
