#pragma once

// Small dense linear-algebra helpers shared by every module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "btk/error.hpp"

namespace btk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Reciprocal-condition floor below which a matrix counts as singular.
inline constexpr double kInvertibilityFloor = 1e-12;

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

inline double frobenius(const Matrix& m) { return m.norm(); }

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// sigma_min / sigma_max; 0 for empty or zero matrices.
inline double reciprocal_condition(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || !std::isfinite(s(0))) return 0.0;
  return s(s.size() - 1) / s(0);
}

inline double condition_number(const Matrix& m) {
  const double rc = reciprocal_condition(m);
  return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

inline bool is_invertible(const Matrix& m) {
  return is_square(m) && all_finite(m) && reciprocal_condition(m) >= kInvertibilityFloor;
}

inline void require_invertible(const Matrix& m, ErrorCode code, const std::string& what) {
  if (!is_invertible(m)) fail(code, what + " is not invertible");
}

/// Solves a * x = b; `a` must already be known invertible.
inline Matrix solve(const Matrix& a, const Matrix& b) { return a.partialPivLu().solve(b); }

inline Matrix inverse(const Matrix& a) { return a.partialPivLu().inverse(); }

/// Absolute residual scaled by max(1, scale).
inline double relative(double residual, double scale) { return residual / std::max(1.0, scale); }

/// diag(1,...,1,-1,...,-1) with p positive and q negative entries.
inline Matrix signature_matrix(int p, int q) {
  Vector d(p + q);
  d.head(p).setOnes();
  d.tail(q).setConstant(-1.0);
  return d.asDiagonal();
}

/// Orthonormal basis (columns) of the null space of `a`, from the SVD.
/// A singular value counts as zero when it is below rel_tol * sigma_max.
inline Matrix null_space(const Matrix& a, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double top = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * std::max(top, 1.0)) ++rank;
  }
  const Eigen::Index cols = a.cols();
  return svd.matrixV().rightCols(cols - rank);
}

/// Column-major vec() and its inverse.
inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Kronecker product, enough for the tiny operators assembled here.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace btk
