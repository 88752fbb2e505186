#pragma once

// Compact Levenberg-Marquardt for the small polynomial systems solved here
// (at most a few dozen unknowns).

#include <cmath>
#include <functional>

#include "btk/linalg.hpp"

namespace btk {

struct LeastSquaresResult {
  Vector x;
  double residual_norm = 0.0;
  int iterations = 0;
};

struct LeastSquaresOptions {
  int max_iterations = 200;
  /// Stop once |r| drops below this.
  double target = 1e-14;
};

/// Minimizes |r(x)|_2 from x0. `residual` fills r, `jacobian` fills dr/dx.
inline LeastSquaresResult levenberg_marquardt(const std::function<Vector(const Vector&)>& residual,
                                              const std::function<Matrix(const Vector&)>& jacobian,
                                              Vector x0, const LeastSquaresOptions& opts = {}) {
  Vector x = std::move(x0);
  Vector r = residual(x);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  int it = 0;
  for (; it < opts.max_iterations && std::sqrt(cost) > opts.target; ++it) {
    const Matrix jac = jacobian(x);
    const Matrix jtj = jac.transpose() * jac;
    const Vector g = jac.transpose() * r;
    if (g.norm() < 1e-300) break;
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Matrix lhs = jtj;
      lhs.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
      const Vector step = lhs.ldlt().solve(-g);
      const Vector trial = x + step;
      const Vector rt = residual(trial);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        x = trial;
        r = rt;
        cost = ct;
        mu = std::max(mu * 0.3, 1e-12);
        improved = true;
        break;
      }
      mu *= 4.0;
    }
    if (!improved) break;
  }
  return LeastSquaresResult{x, std::sqrt(cost), it};
}

}  // namespace btk
