#pragma once

// Linear transports along sampled paths, represented by frame factors:
// the transport from sample s to sample t is F(t)^{-1} F(s).

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btk/error.hpp"
#include "btk/linalg.hpp"
#include "btk/random.hpp"

namespace btk {

using Index = std::size_t;

/// Ordered parameter samples s_0 < ... < s_N with opaque base-point labels.
class PathGrid {
 public:
  PathGrid() = default;

  explicit PathGrid(std::vector<double> params, std::vector<std::string> labels = {})
      : params_(std::move(params)), labels_(std::move(labels)) {
    if (params_.empty()) fail(ErrorCode::InvalidArgument, "path grid needs at least one sample");
    if (labels_.empty()) {
      labels_.reserve(params_.size());
      for (Index i = 0; i < params_.size(); ++i) labels_.push_back("x" + std::to_string(i));
    }
    if (labels_.size() != params_.size())
      fail(ErrorCode::InvalidArgument, "path grid has " + std::to_string(params_.size()) +
                                           " params but " + std::to_string(labels_.size()) +
                                           " labels");
    for (Index i = 0; i < params_.size(); ++i) {
      if (!std::isfinite(params_[i])) fail(ErrorCode::NonFiniteEntry, "path parameter is not finite");
      if (i > 0 && !(params_[i] > params_[i - 1]))
        fail(ErrorCode::InvalidArgument, "path parameters must be strictly increasing");
    }
  }

  /// Uniform grid of `samples` points on [a, b].
  static PathGrid uniform(Index samples, double a = 0.0, double b = 1.0) {
    std::vector<double> s(samples);
    for (Index i = 0; i < samples; ++i)
      s[i] = samples == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(samples - 1);
    return PathGrid(std::move(s));
  }

  Index size() const { return params_.size(); }
  double param(Index i) const { return params_.at(i); }
  const std::string& label(Index i) const { return labels_.at(i); }
  const std::vector<double>& params() const { return params_; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const PathGrid&) const = default;

 private:
  std::vector<double> params_;
  std::vector<std::string> labels_;
};

struct FiberSpec {
  int dim = 1;

  explicit FiberSpec(int n = 1) : dim(n) {
    if (n < 1) fail(ErrorCode::InvalidArgument, "fibre dimension must be >= 1");
  }

  bool operator==(const FiberSpec&) const = default;
};

/// Invertible matrices F(s_i) realizing a transport along a grid.
class FrameFactor {
 public:
  FrameFactor(PathGrid grid, FiberSpec fiber, std::vector<Matrix> matrices)
      : grid_(std::move(grid)), fiber_(fiber), matrices_(std::move(matrices)) {
    if (matrices_.size() != grid_.size())
      fail(ErrorCode::DimensionMismatch, "factor has " + std::to_string(matrices_.size()) +
                                             " matrices for " + std::to_string(grid_.size()) +
                                             " samples");
    lu_.reserve(matrices_.size());
    for (Index i = 0; i < matrices_.size(); ++i) {
      const Matrix& m = matrices_[i];
      if (m.rows() != fiber_.dim || m.cols() != fiber_.dim)
        fail(ErrorCode::ShapeMismatch, "factor matrix " + std::to_string(i) + " is " +
                                           shape_string(m) + ", fibre dim " +
                                           std::to_string(fiber_.dim));
      if (!is_invertible(m))
        fail(ErrorCode::SingularFactor, "factor matrix at sample " + std::to_string(i));
      lu_.emplace_back(m);
    }
  }

  /// Same matrix at every sample.
  static FrameFactor constant(PathGrid grid, const Matrix& m) {
    const auto n = static_cast<int>(m.rows());
    std::vector<Matrix> ms(grid.size(), m);
    return FrameFactor(std::move(grid), FiberSpec(n), std::move(ms));
  }

  const PathGrid& grid() const { return grid_; }
  const FiberSpec& fiber() const { return fiber_; }
  int dim() const { return fiber_.dim; }
  Index size() const { return matrices_.size(); }
  const Matrix& at(Index i) const { return matrices_.at(i); }
  const std::vector<Matrix>& matrices() const { return matrices_; }

  /// F(s_i)^{-1} * rhs.
  Matrix solve(Index i, const Matrix& rhs) const { return lu_.at(i).solve(rhs); }

 private:
  PathGrid grid_;
  FiberSpec fiber_;
  std::vector<Matrix> matrices_;
  std::vector<Eigen::PartialPivLU<Matrix>> lu_;
};

class LinearTransport {
 public:
  explicit LinearTransport(FrameFactor factor) : factor_(std::move(factor)) {}

  const FrameFactor& factor() const { return factor_; }
  const PathGrid& grid() const { return factor_.grid(); }
  int dim() const { return factor_.dim(); }
  Index size() const { return factor_.size(); }

  /// Transport matrix from sample `from` to sample `to`: F(to)^{-1} F(from).
  Matrix matrix(Index from, Index to) const {
    check_index(from);
    check_index(to);
    if (from == to) return identity(dim());
    return factor_.solve(to, factor_.at(from));
  }

  Vector apply(Index from, Index to, const Vector& v) const {
    check_index(from);
    check_index(to);
    if (from == to) return v;
    return factor_.solve(to, factor_.at(from) * v);
  }

 private:
  void check_index(Index i) const {
    if (i >= size())
      fail(ErrorCode::InvalidArgument, "sample index " + std::to_string(i) + " out of range");
  }

  FrameFactor factor_;
};

/// Path-constant gauge matrix D acting as F(s) -> D F(s).
class GaugeMap {
 public:
  explicit GaugeMap(Matrix d) : d_(std::move(d)) {
    if (!is_invertible(d_)) fail(ErrorCode::SingularFactor, "gauge matrix");
  }
  const Matrix& matrix() const { return d_; }

 private:
  Matrix d_;
};

/// Black-box (possibly nonlinear) transport: map(from, to, v).
struct GeneralTransport {
  using Map = std::function<Vector(Index from, Index to, const Vector& v)>;

  PathGrid grid;
  FiberSpec fiber;
  Map map;

  Vector operator()(Index from, Index to, const Vector& v) const { return map(from, to, v); }
};

inline GeneralTransport as_general(const LinearTransport& t) {
  return GeneralTransport{t.grid(), t.factor().fiber(),
                          [t](Index from, Index to, const Vector& v) { return t.apply(from, to, v); }};
}

/// Full table of transport matrices, indexed (from, to).
class TransportTable {
 public:
  TransportTable(PathGrid grid, std::vector<Matrix> entries)
      : grid_(std::move(grid)), entries_(std::move(entries)) {
    if (entries_.size() != grid_.size() * grid_.size())
      fail(ErrorCode::DimensionMismatch, "transport table must have N^2 entries");
    dim_ = entries_.empty() ? 0 : entries_.front().rows();
    for (const auto& e : entries_)
      if (e.rows() != dim_ || e.cols() != dim_)
        fail(ErrorCode::ShapeMismatch, "transport table entries must be square and uniform");
  }

  const PathGrid& grid() const { return grid_; }
  Index size() const { return grid_.size(); }
  Eigen::Index dim() const { return dim_; }
  const Matrix& at(Index from, Index to) const { return entries_.at(from * size() + to); }

 private:
  PathGrid grid_;
  std::vector<Matrix> entries_;
  Eigen::Index dim_ = 0;
};

/// Transport matrix from sample `from` to sample `to`.
inline Matrix transport_matrix(const LinearTransport& t, Index from, Index to) {
  return t.matrix(from, to);
}

inline TransportTable tabulate(const LinearTransport& t) {
  std::vector<Matrix> entries;
  entries.reserve(t.size() * t.size());
  for (Index from = 0; from < t.size(); ++from)
    for (Index to = 0; to < t.size(); ++to) entries.push_back(t.matrix(from, to));
  return TransportTable(t.grid(), std::move(entries));
}

enum class GroupoidLaw { Composition, Identity };

/// Residuals are reported twice: the absolute Frobenius norm and the same
/// norm divided by max(1, scale) for the magnitudes involved. Verdicts use
/// the relative one.
struct GroupoidReport {
  double max_residual = 0.0;
  double max_relative = 0.0;
  bool pass = true;
  GroupoidLaw worst_law = GroupoidLaw::Composition;
  /// (i, j, k): composing i->j->k against i->k; for the identity law i == j == k.
  std::optional<std::array<Index, 3>> worst;
};

/// Worst-case accumulator for pairwise checks.
struct PairReport {
  double max_residual = 0.0;
  double max_relative = 0.0;
  bool pass = true;
  /// (from, to) sample pair with the largest relative residual; set only on failure.
  std::optional<std::pair<Index, Index>> worst_pair;
};

namespace detail {

inline double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

inline void record(GroupoidReport& r, double residual, double scale, GroupoidLaw law,
                   std::array<Index, 3> where) {
  residual = finite_or_inf(residual);
  const double rel = relative(residual, finite_or_inf(scale));
  r.max_residual = std::max(r.max_residual, residual);
  if (!r.worst || rel > r.max_relative) {
    r.max_relative = rel;
    r.worst_law = law;
    r.worst = where;
  }
}

inline void finish(GroupoidReport& r, double tol) {
  r.pass = r.max_relative <= tol;
  if (r.pass) r.worst.reset();
}

inline void require_tol(double tol) {
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
}

class PairScan {
 public:
  void update(double residual, double scale, Index i, Index j) {
    residual = finite_or_inf(residual);
    const double rel = std::isnan(scale) ? std::numeric_limits<double>::infinity()
                                         : relative(residual, scale);
    abs_ = std::max(abs_, residual);
    if (!seen_ || rel > rel_) {
      rel_ = rel;
      where_ = {i, j};
      seen_ = true;
    }
  }

  PairReport report(double tol) const {
    PairReport r{abs_, rel_, rel_ <= tol, std::nullopt};
    if (!r.pass) r.worst_pair = where_;
    return r;
  }

 private:
  double abs_ = 0.0;
  double rel_ = 0.0;
  bool seen_ = false;
  std::pair<Index, Index> where_{0, 0};
};

}  // namespace detail

/// Composition residuals are relative to max(1, |H(j->k)| |H(i->j)|), the
/// rounding scale of the product.
inline GroupoidReport verify_groupoid(const TransportTable& h, double tol) {
  detail::require_tol(tol);
  GroupoidReport r;
  const Index n = h.size();
  const Matrix eye = identity(h.dim());
  for (Index i = 0; i < n; ++i)
    detail::record(r, frobenius(h.at(i, i) - eye), 1.0, GroupoidLaw::Identity, {i, i, i});
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Matrix& first = h.at(i, j);
      const double first_norm = frobenius(first);
      for (Index k = 0; k < n; ++k) {
        const Matrix& second = h.at(j, k);
        const double res = frobenius(second * first - h.at(i, k));
        detail::record(r, res, frobenius(second) * first_norm, GroupoidLaw::Composition, {i, j, k});
      }
    }
  detail::finish(r, tol);
  return r;
}

inline GroupoidReport verify_groupoid(const LinearTransport& t, double tol) {
  return verify_groupoid(tabulate(t), tol);
}

/// Seeded probe vectors used when a black-box map is checked.
inline std::vector<Vector> default_probes(int dim, std::uint64_t seed = 0x5eed, int count = 32) {
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) out.push_back(rng.gaussian_vector(dim));
  return out;
}

inline GroupoidReport verify_groupoid(const GeneralTransport& t, double tol,
                                      const std::vector<Vector>& probes) {
  detail::require_tol(tol);
  GroupoidReport r;
  const Index n = t.grid.size();
  for (const auto& v : probes) {
    for (Index i = 0; i < n; ++i) {
      const Vector same = t(i, i, v);
      detail::record(r, (same - v).norm(), v.norm(), GroupoidLaw::Identity, {i, i, i});
    }
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const Vector mid = t(i, j, v);
        for (Index k = 0; k < n; ++k) {
          const Vector direct = t(i, k, v);
          const Vector composed = t(j, k, mid);
          detail::record(r, (composed - direct).norm(), direct.norm(), GroupoidLaw::Composition,
                         {i, j, k});
        }
      }
  }
  detail::finish(r, tol);
  return r;
}

inline GroupoidReport verify_groupoid(const GeneralTransport& t, double tol) {
  return verify_groupoid(t, tol, default_probes(t.fiber.dim));
}

/// Recovers a frame factor anchored at `anchor`: F(s_i) = H(i -> anchor).
inline FrameFactor factor_from_transport(const TransportTable& h, Index anchor = 0,
                                         double tol = 1e-9) {
  if (anchor >= h.size()) fail(ErrorCode::InvalidArgument, "anchor index out of range");
  const auto report = verify_groupoid(h, tol);
  if (!report.pass)
    fail(ErrorCode::GroupoidViolation,
         "transport family violates the groupoid laws (residual " +
             std::to_string(report.max_residual) + ")");
  std::vector<Matrix> ms;
  ms.reserve(h.size());
  for (Index i = 0; i < h.size(); ++i) ms.push_back(i == anchor ? identity(h.dim()) : h.at(i, anchor));
  return FrameFactor(h.grid(), FiberSpec(static_cast<int>(h.dim())), std::move(ms));
}

inline FrameFactor apply_gauge(const FrameFactor& f, const GaugeMap& d) {
  if (d.matrix().rows() != f.dim())
    fail(ErrorCode::ShapeMismatch, "gauge matrix is " + shape_string(d.matrix()) +
                                       ", fibre dim " + std::to_string(f.dim()));
  std::vector<Matrix> ms;
  ms.reserve(f.size());
  for (const auto& m : f.matrices()) ms.push_back(d.matrix() * m);
  return FrameFactor(f.grid(), f.fiber(), std::move(ms));
}

}  // namespace btk
