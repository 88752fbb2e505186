#pragma once

// Hermitian structures (J, g) and linear transports consistent with them.
//
// A transport consistent with g has factors F(s) = Y Z(s) D(s)^{-1} with
// D^T G D = G_{p,q} and Z pseudo-orthogonal. Consistency with J then asks
// for a constant complex structure P in O(p,q) and Z(s) intertwining
// P with A(s) = D^{-1} J D, i.e. P Z = Z A.

#include <algorithm>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "btk/error.hpp"
#include "btk/least_squares.hpp"
#include "btk/linalg.hpp"
#include "btk/random.hpp"
#include "btk/structure.hpp"
#include "btk/transport.hpp"

namespace btk {

struct Signature {
  int p = 0;
  int q = 0;

  int n() const { return p + q; }
  Matrix matrix() const { return signature_matrix(p, q); }
  std::string str() const { return "(" + std::to_string(p) + "," + std::to_string(q) + ")"; }

  bool operator==(const Signature&) const = default;
};

/// Reported instead of a value when a system has no solution.
struct Infeasible {
  std::string reason;
  /// Smallest residual reached by the seeded search (0 when no search ran).
  double certificate_residual = 0.0;
  int starts = 0;
  /// Sample at which a per-sample solve failed, if any.
  std::optional<Index> sample;
};

/// Either a value or an infeasibility report.
template <class T>
class Outcome {
 public:
  Outcome(T value) : v_(std::move(value)) {}
  Outcome(Infeasible inf) : v_(std::move(inf)) {}

  bool feasible() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return feasible(); }
  const T& value() const { return std::get<T>(v_); }
  const T& operator*() const { return value(); }
  const T* operator->() const { return &value(); }
  const Infeasible& infeasible() const { return std::get<Infeasible>(v_); }

 private:
  std::variant<T, Infeasible> v_;
};

// ---------------------------------------------------------------------------
// Signature normalization

struct NormalizedMetric {
  Matrix d;
  Signature sig;
};

/// D with D^T G D = G_{p,q}: eigenvectors scaled by |lambda|^{-1/2}, sorted by
/// descending eigenvalue so positive directions come first. Each eigenvector
/// is signed so its largest-magnitude component is positive.
inline NormalizedMetric signature_normalize(const Matrix& g, double tol = 1e-9) {
  if (!is_square(g)) fail(ErrorCode::ShapeMismatch, "metric is " + shape_string(g));
  if (!all_finite(g)) fail(ErrorCode::NonFiniteEntry, "metric has a non-finite entry");
  if (frobenius(g - g.transpose()) > tol * std::max(1.0, frobenius(g)))
    fail(ErrorCode::NotSymmetric, "metric is not symmetric");
  const Matrix sym = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& lambda = eig.eigenvalues();
  const Matrix& vecs = eig.eigenvectors();
  const Eigen::Index n = g.rows();
  const double spectral = lambda.cwiseAbs().maxCoeff();
  if (lambda.cwiseAbs().minCoeff() <= tol * spectral || spectral == 0.0)
    fail(ErrorCode::DegenerateMetric, "metric has a (near) zero eigenvalue");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return lambda(a) > lambda(b); });

  NormalizedMetric out{Matrix(n, n), Signature{}};
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index k = order[static_cast<std::size_t>(c)];
    Vector v = vecs.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.d.col(c) = v / std::sqrt(std::abs(lambda(k)));
    if (lambda(k) > 0.0) ++out.sig.p;
    else ++out.sig.q;
  }
  return out;
}

struct SignatureReport {
  bool pass = true;
  std::vector<Signature> signatures;
  /// First sample whose signature differs from sample 0.
  std::optional<Index> first_change;
};

inline SignatureReport check_signature_constancy(const BilinearField& g) {
  if (g.kind != BilinearKind::Symmetric)
    fail(ErrorCode::NotSymmetric, "signature is defined for symmetric forms");
  SignatureReport r;
  for (Index i = 0; i < g.matrices.size(); ++i) {
    r.signatures.push_back(signature_normalize(g.matrices[i]).sig);
    if (!r.first_change && !(r.signatures.back() == r.signatures.front())) r.first_change = i;
  }
  r.pass = !r.first_change.has_value();
  return r;
}

// ---------------------------------------------------------------------------
// The constant complex structure P

/// P with P^T G_{p,q} P = G_{p,q} and P P = -I.
struct PMatrix {
  Matrix matrix;
  Signature sig;
};

/// |P^T G P - G|_F for G = G_{p,q}.
inline double pseudo_orthogonality_residual(const Matrix& m, const Signature& sig) {
  const Matrix g = sig.matrix();
  return frobenius(m.transpose() * g * m - g);
}

inline double complex_structure_residual(const Matrix& m) {
  return frobenius(m * m + identity(m.rows()));
}

/// Sum of both defining residuals of P.
inline double p_residual(const Matrix& m, const Signature& sig) {
  return pseudo_orthogonality_residual(m, sig) + complex_structure_residual(m);
}

struct SearchOptions {
  int starts = 64;
  int iterations = 200;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct PSearchResult {
  /// Smallest combined residual over all starts.
  double best_residual = std::numeric_limits<double>::infinity();
  Matrix best;
  /// Final iterates whose combined residual fell below `accept`.
  std::vector<Matrix> solutions;
};

/// Seeded Levenberg-Marquardt search for P over all n x n matrices, run from
/// `opts.starts` random starting points.
inline PSearchResult search_p(const Signature& sig, const SearchOptions& opts, double accept = 1e-10) {
  const Eigen::Index n = sig.n();
  const Matrix g = sig.matrix();
  const Matrix eye = identity(n);
  auto residual = [&](const Vector& x) {
    const Matrix p = unvec(x, n, n);
    Vector r(2 * n * n);
    r << vec(p.transpose() * g * p - g), vec(p * p + eye);
    return r;
  };
  auto jacobian = [&](const Vector& x) {
    const Matrix p = unvec(x, n, n);
    Matrix jac(2 * n * n, n * n);
    for (Eigen::Index k = 0; k < n * n; ++k) {
      Matrix e = Matrix::Zero(n, n);
      e(k % n, k / n) = 1.0;
      jac.col(k) << vec(e.transpose() * g * p + p.transpose() * g * e), vec(e * p + p * e);
    }
    return jac;
  };
  PSearchResult out;
  for (int s = 0; s < opts.starts; ++s) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(s)));
    const double scale = rng.log_uniform(0.1, 3.0);
    const Vector x0 = vec(scale * rng.gaussian(n, n));
    const auto res = levenberg_marquardt(residual, jacobian, x0, {opts.iterations, 1e-15});
    const Matrix p = unvec(res.x, n, n);
    const double combined = p_residual(p, sig);
    if (combined < out.best_residual) {
      out.best_residual = combined;
      out.best = p;
    }
    if (combined <= accept) out.solutions.push_back(p);
  }
  return out;
}

/// Block construction when p and q are both even: [[0,1],[-1,0]] blocks on
/// the positive and on the negative diagonal block. Any other signature has
/// no solution (a complex structure compatible with the form makes both
/// counts even); the certificate is the best residual of a seeded search.
inline Outcome<PMatrix> solve_P(const Signature& sig, const SearchOptions& opts = {}) {
  if (sig.p < 0 || sig.q < 0 || sig.n() < 1)
    fail(ErrorCode::InvalidArgument, "signature " + sig.str() + " is invalid");
  if (sig.p % 2 == 0 && sig.q % 2 == 0) {
    Matrix p = Matrix::Zero(sig.n(), sig.n());
    for (int k = 0; k + 1 < sig.n(); k += 2) {
      p(k, k + 1) = 1.0;
      p(k + 1, k) = -1.0;
    }
    return PMatrix{p, sig};
  }
  const auto search = search_p(sig, opts);
  return Infeasible{
      sig.n() % 2 != 0 ? "odd fibre dimension admits no complex structure"
                       : "signature " + sig.str() + " admits no compatible complex structure",
      search.best_residual, opts.starts, std::nullopt};
}

// ---------------------------------------------------------------------------
// Hermitian structures

/// (J, G) sampled on one grid.
struct HermitianStructure {
  AlmostComplexField j;
  BilinearField g;

  HermitianStructure(AlmostComplexField jf, BilinearField gf) : j(std::move(jf)), g(std::move(gf)) {
    if (!(j.grid == g.grid)) fail(ErrorCode::GridMismatch, "J and G live on different grids");
    if (j.dim() != g.dim()) fail(ErrorCode::ShapeMismatch, "J and G dimensions differ");
    if (g.kind != BilinearKind::Symmetric) fail(ErrorCode::NotSymmetric, "Hermitian metric must be symmetric");
  }

  const PathGrid& grid() const { return j.grid; }
  Eigen::Index dim() const { return j.dim(); }
};

/// Largest relative |J^T G J - G| over the samples.
inline double compatibility_residual(const HermitianStructure& h) {
  double worst = 0.0;
  for (Index i = 0; i < h.j.matrices.size(); ++i) {
    const Matrix& jm = h.j.matrices[i];
    const Matrix& gm = h.g.matrices[i];
    worst = std::max(worst, relative(frobenius(jm.transpose() * gm * jm - gm),
                                     frobenius(jm) * frobenius(jm) * frobenius(gm)));
  }
  return worst;
}

struct HermitianValidity {
  bool valid = false;
  double almost_complex_residual = 0.0;
  double compatibility_residual = 0.0;
};

inline HermitianValidity validate(const HermitianStructure& h, double tol = kDefaultTol) {
  HermitianValidity v;
  v.almost_complex_residual = check_almost_complex(h.j.matrices, tol).max_relative;
  v.compatibility_residual = compatibility_residual(h);
  v.valid = v.almost_complex_residual <= tol && v.compatibility_residual <= tol;
  return v;
}

/// C0 and C with I = C^T C^{-1} = -C0 C0 = C0^T C C0 C^{-1}.
struct ConjugatorPair {
  Matrix c0;
  Matrix c;
};

/// Empty when valid, otherwise names the violated clause.
inline std::optional<std::string> conjugator_pair_violation(const ConjugatorPair& cc,
                                                            double tol = kDefaultTol) {
  if (!is_square(cc.c0) || !is_square(cc.c) || cc.c0.rows() != cc.c.rows())
    return "C0 and C must be square matrices of equal size";
  if (!is_invertible(cc.c)) return "C is singular";
  const Matrix eye = identity(cc.c.rows());
  const Matrix c_inv = inverse(cc.c);
  if (frobenius(cc.c.transpose() * c_inv - eye) > tol * std::max(1.0, frobenius(cc.c) * frobenius(c_inv)))
    return "C^T C^{-1} = I fails (C must be symmetric)";
  if (frobenius(cc.c0 * cc.c0 + eye) > tol * std::max(1.0, frobenius(cc.c0) * frobenius(cc.c0)))
    return "C0 C0 = -I fails";
  const Matrix lhs = cc.c0.transpose() * cc.c * cc.c0 * c_inv;
  if (frobenius(lhs - eye) >
      tol * std::max(1.0, frobenius(cc.c0) * frobenius(cc.c0) * frobenius(cc.c) * frobenius(c_inv)))
    return "C0^T C C0 C^{-1} = I fails";
  return std::nullopt;
}

/// J(s) = F(s)^{-1} C0 F(s), G(s) = F(s)^T C F(s).
inline HermitianStructure hermitian_from_transport(const FrameFactor& f, const ConjugatorPair& cc,
                                                   double tol = kDefaultTol) {
  if (auto why = conjugator_pair_violation(cc, tol))
    fail(ErrorCode::InvalidConjugatorPair, *why);
  if (cc.c.rows() != f.dim()) fail(ErrorCode::ShapeMismatch, "conjugator pair does not match the fibre");
  std::vector<Matrix> js;
  std::vector<Matrix> gs;
  js.reserve(f.size());
  gs.reserve(f.size());
  for (Index i = 0; i < f.size(); ++i) {
    js.push_back(f.solve(i, cc.c0 * f.at(i)));
    const Matrix gm = f.at(i).transpose() * cc.c * f.at(i);
    gs.push_back(0.5 * (gm + gm.transpose()));
  }
  return HermitianStructure(AlmostComplexField(f.grid(), std::move(js)),
                            BilinearField(f.grid(), std::move(gs), BilinearKind::Symmetric, tol));
}

struct HermitianConsistencyReport {
  bool pass = false;
  AlmostComplexReport complex_part;
  CheckReport metric_part;
  double compatibility_residual = 0.0;
};

/// Both consistency conditions plus J^T G J = G.
inline HermitianConsistencyReport check_hermitian_consistency(const HermitianStructure& h,
                                                              const LinearTransport& t,
                                                              double tol = kDefaultTol) {
  HermitianConsistencyReport r;
  r.complex_part = check_ac_consistency(h.j, t, tol);
  r.metric_part = check_bilinear_consistency(h.g, t, tol);
  r.compatibility_residual = compatibility_residual(h);
  r.pass = r.complex_part.pass && r.metric_part.pass && r.compatibility_residual <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// The Z system: Z^T G_{p,q} Z = G_{p,q}, P Z - Z A = 0

struct ZSolveOptions {
  int starts = 16;
  int iterations = 200;
  double accept = 1e-8;
  std::uint64_t seed = 0x2545f4914f6cdd1dULL;
  bool parallel = false;
};

/// Orthonormal basis of {Z : P Z = Z A}, one n x n matrix per basis vector.
inline std::vector<Matrix> intertwiner_basis(const Matrix& p, const Matrix& a) {
  const Eigen::Index n = p.rows();
  const Matrix eye = identity(n);
  // vec(P Z - Z A) = (I (x) P - A^T (x) I) vec(Z)
  const Matrix op = kron(eye, p) - kron(a.transpose(), eye);
  const Matrix basis = null_space(op, 1e-10);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(basis.cols()));
  for (Eigen::Index k = 0; k < basis.cols(); ++k) out.push_back(unvec(basis.col(k), n, n));
  return out;
}

struct ZSampleResult {
  std::optional<Matrix> z;
  double best_residual = std::numeric_limits<double>::infinity();
  Eigen::Index null_dimension = 0;
};

/// One sample: pseudo-orthogonal element of the intertwiner space, by
/// seeded Levenberg-Marquardt over the basis coefficients.
inline ZSampleResult solve_z_sample(const Matrix& a, const PMatrix& p, const ZSolveOptions& opts,
                                    std::uint64_t seed) {
  const Eigen::Index n = a.rows();
  const Matrix g = p.sig.matrix();
  const auto basis = intertwiner_basis(p.matrix, a);
  ZSampleResult out;
  out.null_dimension = static_cast<Eigen::Index>(basis.size());
  if (basis.empty()) return out;
  const auto k = static_cast<Eigen::Index>(basis.size());

  auto assemble = [&](const Vector& c) {
    Matrix z = Matrix::Zero(n, n);
    for (Eigen::Index b = 0; b < k; ++b) z += c(b) * basis[static_cast<std::size_t>(b)];
    return z;
  };
  auto residual = [&](const Vector& c) {
    const Matrix z = assemble(c);
    return vec(z.transpose() * g * z - g);
  };
  auto jacobian = [&](const Vector& c) {
    const Matrix z = assemble(c);
    const Matrix gz = g * z;
    Matrix jac(n * n, k);
    for (Eigen::Index b = 0; b < k; ++b) {
      const Matrix& e = basis[static_cast<std::size_t>(b)];
      jac.col(b) = vec(e.transpose() * gz + gz.transpose() * e);
    }
    return jac;
  };

  for (int s = 0; s < opts.starts; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    const Vector c0 = rng.gaussian_vector(k) * std::sqrt(static_cast<double>(n) / static_cast<double>(k));
    const auto res = levenberg_marquardt(residual, jacobian, c0, {opts.iterations, 1e-14});
    const double r = res.residual_norm;
    if (r < out.best_residual) {
      out.best_residual = r;
      if (r <= opts.accept) {
        out.z = assemble(res.x);
        break;
      }
    }
  }
  return out;
}

/// Per-sample solves of the Z system. Each sample uses its own derived seed,
/// so serial and parallel runs give identical results.
inline Outcome<std::vector<Matrix>> solve_Z_system(const std::vector<Matrix>& as, const PMatrix& p,
                                                   const ZSolveOptions& opts = {}) {
  const Eigen::Index n = p.matrix.rows();
  for (Index i = 0; i < as.size(); ++i) {
    const Matrix& a = as[i];
    if (a.rows() != n || a.cols() != n)
      fail(ErrorCode::ShapeMismatch, "A at sample " + std::to_string(i) + " is " + shape_string(a));
    if (frobenius(a * a + identity(n)) > 1e-8 * std::max(1.0, frobenius(a) * frobenius(a)))
      fail(ErrorCode::BadInvolution, "A^2 != -I at sample " + std::to_string(i));
  }
  std::vector<ZSampleResult> results(as.size());
  auto run = [&](Index i) {
    return solve_z_sample(as[i], p, opts, derive_seed(opts.seed, static_cast<std::uint64_t>(i)));
  };
  if (opts.parallel && as.size() > 1) {
    std::vector<std::future<ZSampleResult>> jobs;
    jobs.reserve(as.size());
    for (Index i = 0; i < as.size(); ++i) jobs.push_back(std::async(std::launch::async, run, i));
    for (Index i = 0; i < as.size(); ++i) results[i] = jobs[i].get();
  } else {
    for (Index i = 0; i < as.size(); ++i) results[i] = run(i);
  }
  std::vector<Matrix> zs;
  zs.reserve(as.size());
  for (Index i = 0; i < results.size(); ++i) {
    if (!results[i].z) {
      return Infeasible{results[i].null_dimension == 0
                            ? "P and A share no intertwiner"
                            : "no pseudo-orthogonal intertwiner found",
                        results[i].best_residual, opts.starts, i};
    }
    zs.push_back(*results[i].z);
  }
  return zs;
}

// ---------------------------------------------------------------------------
// Transports from a Hermitian structure

struct PseudoOrthFactorization {
  Matrix y;
  std::vector<Matrix> z;
  std::vector<Matrix> d;
  Signature sig;
};

struct HermitianSolveResult {
  FrameFactor factor;
  PseudoOrthFactorization parts;
  PMatrix p;
  HermitianConsistencyReport check;
};

struct HermitianSolveOptions {
  SearchOptions p_search{};
  ZSolveOptions z_solve{};
  double tol = 1e-8;
};

/// Normalizes G, takes P for the signature, solves for Z and assembles
/// F(s) = Y Z(s) D(s)^{-1}. The produced factor is re-checked against
/// both consistency conditions.
inline Outcome<HermitianSolveResult> transport_from_hermitian(const HermitianStructure& h,
                                                              std::optional<Matrix> y = std::nullopt,
                                                              const HermitianSolveOptions& opts = {}) {
  const Eigen::Index n = h.dim();
  const Matrix ym = y.value_or(identity(n));
  if (ym.rows() != n || !is_invertible(ym)) fail(ErrorCode::SingularFactor, "Y must be invertible n x n");

  std::vector<Matrix> ds;
  std::vector<Signature> sigs;
  for (Index i = 0; i < h.g.matrices.size(); ++i) {
    auto norm = signature_normalize(h.g.matrices[i]);
    ds.push_back(std::move(norm.d));
    sigs.push_back(norm.sig);
    if (!(sigs.back() == sigs.front()))
      fail(ErrorCode::SignatureVaries, "signature " + sigs.back().str() + " at sample " +
                                           std::to_string(i) + " differs from " + sigs.front().str());
  }
  const Signature sig = sigs.front();
  auto p = solve_P(sig, opts.p_search);
  if (!p) return p.infeasible();

  const auto validity = validate(h, opts.tol);
  if (!validity.valid)
    fail(ErrorCode::InvalidArgument, "Hermitian structure is invalid (J^2+I residual " +
                                         std::to_string(validity.almost_complex_residual) +
                                         ", J^T G J - G residual " +
                                         std::to_string(validity.compatibility_residual) + ")");

  std::vector<Matrix> as;
  as.reserve(ds.size());
  for (Index i = 0; i < ds.size(); ++i) as.push_back(solve(ds[i], h.j.matrices[i] * ds[i]));
  auto zs = solve_Z_system(as, *p, opts.z_solve);
  if (!zs) return zs.infeasible();

  std::vector<Matrix> fs;
  fs.reserve(ds.size());
  for (Index i = 0; i < ds.size(); ++i) fs.push_back(ym * zs.value()[i] * inverse(ds[i]));
  FrameFactor factor(h.grid(), FiberSpec(static_cast<int>(n)), std::move(fs));
  auto report = check_hermitian_consistency(h, LinearTransport(factor), opts.tol);
  return HermitianSolveResult{std::move(factor), PseudoOrthFactorization{ym, zs.value(), ds, sig}, *p,
                              std::move(report)};
}

}  // namespace btk
