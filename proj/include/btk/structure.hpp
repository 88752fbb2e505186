#pragma once

// Consistency of transports with fibre structures: almost complex
// structures, scalar multiplication, addition, Finsler functions and
// symmetric/antisymmetric bilinear forms.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btk/error.hpp"
#include "btk/linalg.hpp"
#include "btk/morphism.hpp"
#include "btk/transport.hpp"

namespace btk {

/// Endomorphisms J(gamma(s_i)) sampled along a path.
struct AlmostComplexField {
  PathGrid grid;
  std::vector<Matrix> matrices;

  AlmostComplexField(PathGrid g, std::vector<Matrix> ms) : grid(std::move(g)), matrices(std::move(ms)) {
    if (matrices.size() != grid.size())
      fail(ErrorCode::DimensionMismatch, "almost complex field length does not match its grid");
    for (const auto& m : matrices)
      if (!is_square(m) || m.rows() != matrices.front().rows())
        fail(ErrorCode::ShapeMismatch, "almost complex field matrices must be uniform and square");
  }

  Eigen::Index dim() const { return matrices.front().rows(); }
};

enum class BilinearKind { Symmetric, Antisymmetric };

struct BilinearField {
  PathGrid grid;
  std::vector<Matrix> matrices;
  BilinearKind kind = BilinearKind::Symmetric;

  /// Validates symmetry class and nondegeneracy at every sample.
  BilinearField(PathGrid g, std::vector<Matrix> ms, BilinearKind k = BilinearKind::Symmetric, double tol = kDefaultTol)
      : grid(std::move(g)), matrices(std::move(ms)), kind(k) {
    if (matrices.size() != grid.size())
      fail(ErrorCode::DimensionMismatch, "bilinear field length does not match its grid");
    for (Index i = 0; i < matrices.size(); ++i) {
      const Matrix& m = matrices[i];
      if (!is_square(m) || m.rows() != matrices.front().rows())
        fail(ErrorCode::ShapeMismatch, "bilinear field matrices must be uniform and square");
      const double sign = kind == BilinearKind::Symmetric ? 1.0 : -1.0;
      if (frobenius(m.transpose() - sign * m) > tol * std::max(1.0, frobenius(m)))
        fail(ErrorCode::NotSymmetric, std::string("matrix at sample ") + std::to_string(i) +
                                          (kind == BilinearKind::Symmetric ? " is not symmetric"
                                                                           : " is not antisymmetric"));
      if (!is_invertible(m))
        fail(ErrorCode::DegenerateMetric, "form at sample " + std::to_string(i) + " is degenerate");
    }
  }

  Eigen::Index dim() const { return matrices.front().rows(); }
};

/// Black-box Finsler function Fm(sample, v) >= 0.
struct FinslerSampler {
  PathGrid grid;
  std::function<double(Index, const Vector&)> func;

  double operator()(Index i, const Vector& v) const { return func(i, v); }
};

/// Fibre vectors A(gamma(s_i)) of a section.
struct SectionField {
  PathGrid grid;
  std::vector<Vector> vectors;

  SectionField(PathGrid g, std::vector<Vector> vs) : grid(std::move(g)), vectors(std::move(vs)) {
    if (vectors.size() != grid.size())
      fail(ErrorCode::DimensionMismatch, "section length does not match its grid");
  }
};

using CheckReport = PairReport;

/// J(i)^2 == -I at every sample; worst_pair holds (i, i) of the worst sample.
inline CheckReport check_almost_complex(const std::vector<Matrix>& js, double tol = kDefaultTol) {
  detail::require_tol(tol);
  detail::PairScan w;
  for (Index i = 0; i < js.size(); ++i) {
    if (!is_square(js[i])) fail(ErrorCode::ShapeMismatch, "J at sample " + std::to_string(i));
    const Matrix sq = js[i] * js[i];
    w.update(frobenius(sq + identity(js[i].rows())), frobenius(js[i]) * frobenius(js[i]), i, i);
  }
  return w.report(tol);
}

struct AlmostComplexReport {
  bool pass = false;
  /// Commutation J(j) I(i->j) == I(i->j) J(i).
  CheckReport commutation;
  /// J(i) == F(i)^{-1} C0 F(i) with C0 = F(a) J(a) F(a)^{-1}.
  double representation_residual = 0.0;
  /// C0 * C0 == -I.
  double c0_square_residual = 0.0;
  Index anchor = 0;
  Matrix c0;
  /// Commutation verdict and conjugator-representation verdict agree.
  bool cross_validated = true;
};

inline AlmostComplexReport check_ac_consistency(const AlmostComplexField& j, const LinearTransport& t,
                                                double tol = kDefaultTol, Index anchor = 0) {
  detail::require_tol(tol);
  if (j.dim() % 2 != 0) fail(ErrorCode::InvalidArgument, "almost complex structures need even dimension");
  if (j.dim() != t.dim()) fail(ErrorCode::ShapeMismatch, "J and transport dimensions differ");
  if (!(j.grid == t.grid())) fail(ErrorCode::GridMismatch, "J and transport live on different grids");
  if (anchor >= t.size()) fail(ErrorCode::InvalidArgument, "anchor index out of range");

  AlmostComplexReport r;
  r.anchor = anchor;
  const PathMorphism as_morphism(BaseMap::identity_on(t.grid()), j.matrices);
  r.commutation = check_consistency(as_morphism, t, t, tol);

  const FrameFactor& f = t.factor();
  const Matrix& fa = f.at(anchor);
  r.c0 = fa * j.matrices[anchor] * inverse(fa);
  double rep = 0.0;
  for (Index i = 0; i < t.size(); ++i) {
    const Matrix conj = f.solve(i, r.c0 * f.at(i));
    rep = std::max(rep, relative(frobenius(j.matrices[i] - conj), frobenius(j.matrices[i])));
  }
  r.representation_residual = rep;
  r.c0_square_residual =
      relative(frobenius(r.c0 * r.c0 + identity(r.c0.rows())), frobenius(r.c0) * frobenius(r.c0));
  r.cross_validated = (rep <= tol) == r.commutation.pass;
  r.pass = r.commutation.pass && r.c0_square_residual <= tol;
  return r;
}

inline CheckReport check_homogeneity(const GeneralTransport& t, const std::vector<double>& scalars,
                                     const std::vector<Vector>& vectors, double tol = kDefaultTol) {
  detail::require_tol(tol);
  detail::PairScan w;
  const Index n = t.grid.size();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (const auto& u : vectors) {
        const Vector tu = t(i, j, u);
        for (double lambda : scalars) {
          const Vector lhs = t(i, j, lambda * u);
          const Vector rhs = lambda * tu;
          w.update((lhs - rhs).norm(), rhs.norm(), i, j);
        }
      }
  return w.report(tol);
}

/// Scalars used when none are supplied.
inline std::vector<double> default_scalars() { return {-2.0, -1.0, 0.5, 2.0}; }

inline CheckReport check_homogeneity(const GeneralTransport& t, double tol = kDefaultTol) {
  return check_homogeneity(t, default_scalars(), default_probes(t.fiber.dim), tol);
}

inline CheckReport check_additivity(const GeneralTransport& t,
                                    const std::vector<std::pair<Vector, Vector>>& pairs,
                                    double tol = kDefaultTol) {
  detail::require_tol(tol);
  detail::PairScan w;
  const Index n = t.grid.size();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (const auto& [u, v] : pairs) {
        const Vector lhs = t(i, j, u + v);
        const Vector rhs = t(i, j, u) + t(i, j, v);
        w.update((lhs - rhs).norm(), rhs.norm(), i, j);
      }
  return w.report(tol);
}

inline std::vector<std::pair<Vector, Vector>> default_pairs(int dim, std::uint64_t seed = 0x5eed) {
  const auto probes = default_probes(dim, seed, 32);
  std::vector<std::pair<Vector, Vector>> out;
  for (Index k = 0; k + 1 < probes.size(); k += 2) out.emplace_back(probes[k], probes[k + 1]);
  return out;
}

inline CheckReport check_additivity(const GeneralTransport& t, double tol = kDefaultTol) {
  return check_additivity(t, default_pairs(t.fiber.dim), tol);
}

/// A(j) + I(i->j) u == I(i->j)(A(i) + u): consistency of the transport with
/// translation by the section A, probed on the supplied vectors.
inline CheckReport check_addition_consistency(const GeneralTransport& t, const SectionField& a,
                                              const std::vector<Vector>& probes,
                                              double tol = kDefaultTol) {
  detail::require_tol(tol);
  if (!(a.grid == t.grid)) fail(ErrorCode::GridMismatch, "section and transport grids differ");
  detail::PairScan w;
  const Index n = t.grid.size();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (const auto& u : probes) {
        const Vector lhs = a.vectors[j] + t(i, j, u);
        const Vector rhs = t(i, j, a.vectors[i] + u);
        w.update((lhs - rhs).norm(), rhs.norm(), i, j);
      }
  return w.report(tol);
}

/// Section obtained by transporting `start` from sample `from` to every sample.
inline SectionField transported_section(const GeneralTransport& t, Index from, const Vector& start) {
  std::vector<Vector> vs;
  vs.reserve(t.grid.size());
  for (Index j = 0; j < t.grid.size(); ++j) vs.push_back(t(from, j, start));
  return SectionField(t.grid, std::move(vs));
}

/// Is the section transported by t? A(j) == I(i->j) A(i).
inline CheckReport check_section_vectors_transported(const GeneralTransport& t, const SectionField& a,
                                                     double tol = kDefaultTol) {
  detail::require_tol(tol);
  detail::PairScan w;
  for (Index i = 0; i < t.grid.size(); ++i)
    for (Index j = 0; j < t.grid.size(); ++j) {
      const Vector moved = t(i, j, a.vectors[i]);
      w.update((a.vectors[j] - moved).norm(), moved.norm(), i, j);
    }
  return w.report(tol);
}

inline CheckReport check_finsler_consistency(const FinslerSampler& fm, const LinearTransport& t,
                                             const std::vector<Vector>& probes,
                                             double tol = kDefaultTol) {
  detail::require_tol(tol);
  if (!(fm.grid == t.grid())) fail(ErrorCode::GridMismatch, "Finsler function and transport grids differ");
  detail::PairScan w;
  for (Index i = 0; i < t.size(); ++i)
    for (Index j = 0; j < t.size(); ++j) {
      const Matrix h = t.matrix(i, j);
      for (const auto& a : probes) {
        const double here = fm(i, a);
        const double there = fm(j, h * a);
        w.update(std::abs(here - there), here, i, j);
      }
    }
  return w.report(tol);
}

inline CheckReport check_finsler_consistency(const FinslerSampler& fm, const LinearTransport& t,
                                             double tol = kDefaultTol) {
  return check_finsler_consistency(fm, t, default_probes(t.dim()), tol);
}

/// |Fm(i, lambda v) - lambda Fm(i, v)| for lambda > 0: the positive
/// homogeneity a Finsler function must have.
inline CheckReport check_finsler_homogeneity(const FinslerSampler& fm, int dim,
                                             double tol = kDefaultTol) {
  detail::require_tol(tol);
  detail::PairScan w;
  for (Index i = 0; i < fm.grid.size(); ++i)
    for (const auto& v : default_probes(dim))
      for (double lambda : {0.5, 2.0, 3.0}) {
        const double base = fm(i, v);
        w.update(std::abs(fm(i, lambda * v) - lambda * base), lambda * base, i, i);
      }
  return w.report(tol);
}

/// B(i) == I(i->j)^T B(j) I(i->j) for all pairs, symmetric or antisymmetric B.
inline CheckReport check_bilinear_consistency(const BilinearField& b, const LinearTransport& t,
                                              double tol = kDefaultTol) {
  detail::require_tol(tol);
  if (b.dim() != t.dim()) fail(ErrorCode::ShapeMismatch, "form and transport dimensions differ");
  if (!(b.grid == t.grid())) fail(ErrorCode::GridMismatch, "form and transport grids differ");
  detail::PairScan w;
  for (Index i = 0; i < t.size(); ++i)
    for (Index j = 0; j < t.size(); ++j) {
      const Matrix h = t.matrix(i, j);
      const Matrix moved = h.transpose() * b.matrices[j] * h;
      w.update(frobenius(b.matrices[i] - moved),
               std::max(frobenius(b.matrices[i]), frobenius(h) * frobenius(h) * frobenius(b.matrices[j])),
               i, j);
    }
  return w.report(tol);
}

}  // namespace btk
