#pragma once

// Reference computations used by the tests. Deliberately naive and built on
// different Eigen code paths (explicit full-pivot inverses, closed forms)
// than the library.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "btk/linalg.hpp"
#include "btk/random.hpp"

namespace oracle {

using btk::Matrix;

inline Matrix rotation(double t) {
  Matrix r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

inline Matrix standard_j(int n) {
  Matrix j = Matrix::Zero(n, n);
  for (int k = 0; k + 1 < n; k += 2) {
    j(k, k + 1) = 1.0;
    j(k + 1, k) = -1.0;
  }
  return j;
}

inline Matrix full_inverse(const Matrix& m) { return Eigen::FullPivLU<Matrix>(m).inverse(); }

/// H(i -> j) = F(j)^{-1} F(i) through an explicit inverse.
inline Matrix transport(const std::vector<Matrix>& f, std::size_t from, std::size_t to) {
  return full_inverse(f[to]) * f[from];
}

inline double rel(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

/// (positive, negative) eigenvalue counts of a symmetric matrix.
inline std::pair<int, int> sign_counts(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  int p = 0;
  int q = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) (es.eigenvalues()(i) > 0 ? p : q)++;
  return {p, q};
}

inline std::vector<Matrix> random_factor(btk::Rng& rng, int n, int samples, double max_cond) {
  std::vector<Matrix> out;
  for (int i = 0; i < samples; ++i) out.push_back(rng.with_condition(n, rng.log_uniform(1.0, max_cond)));
  return out;
}

}  // namespace oracle
