#include "acss/rng.hpp"

#include <algorithm>
#include <numeric>

namespace acss {

std::uint64_t derive_seed(std::uint64_t root,
                          std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

Vec Rng::normal_vector(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

std::vector<Eigen::Index> Rng::subset(Eigen::Index n, Eigen::Index size) {
  // Floyd's algorithm: exactly `size` draws, uniform over subsets.
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(size));
  for (Eigen::Index j = n - size; j < n; ++j) {
    auto t = static_cast<Eigen::Index>(index(static_cast<std::size_t>(j + 1)));
    if (std::find(out.begin(), out.end(), t) == out.end())
      out.push_back(t);
    else
      out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[index(i)]);
  return p;
}

}  // namespace acss
