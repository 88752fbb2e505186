#pragma once

// Portable seeded generators. The distributions are written out by hand
// because the std:: distributions are implementation-defined and reports
// must be reproducible across toolchains.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "btk/linalg.hpp"

namespace btk {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent sub-stream (trial, sample, start ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Log-uniform in [lo, hi], lo > 0.
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Vector gaussian_vector(Eigen::Index n) { return gaussian(n, 1); }

  /// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
  Matrix orthogonal(Eigen::Index n) {
    Matrix g = gaussian(n, n);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i)
      if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    return q;
  }

  /// U * diag(sigma) * V^T with sigma_max / sigma_min == cond exactly and
  /// intermediate singular values log-uniform in between.
  Matrix with_condition(Eigen::Index n, double cond, double scale = 1.0) {
    Vector sigma(n);
    sigma(0) = scale;
    for (Eigen::Index i = 1; i < n; ++i) sigma(i) = scale / log_uniform(1.0, cond);
    if (n > 1) sigma(n - 1) = scale / cond;
    return orthogonal(n) * sigma.asDiagonal() * orthogonal(n).transpose();
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace btk
