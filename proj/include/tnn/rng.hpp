#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace tnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

// Independent generator for (seed, stream). Same pair, same numbers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull)));
}

// libstdc++'s normal_distribution caches a spare value; a Box-Muller of our
// own keeps the draw sequence independent of distribution object lifetime.
inline double gaussian(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = u(rng);
  while (a <= 0.0) a = u(rng);
  const double b = u(rng);
  return std::sqrt(-2.0 * std::log(a)) * std::cos(two_pi * b);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

inline Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian(rng);
  return v;
}

inline Eigen::VectorXd unit_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v = gaussian_vector(rng, n);
  double nv = v.norm();
  while (nv == 0.0) {
    v = gaussian_vector(rng, n);
    nv = v.norm();
  }
  return v / nv;
}

inline Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian(rng);
  return m;
}

}  // namespace tnn
