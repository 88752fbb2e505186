#pragma once

// Bundle morphisms sampled along a path and their consistency with a pair
// of linear transports: F(t) * I1(s->t) == I2(f(s)->f(t)) * F(s).

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btk/error.hpp"
#include "btk/linalg.hpp"
#include "btk/transport.hpp"

namespace btk {

inline constexpr double kDefaultTol = 1e-9;

/// Sample-wise realization of the base map f along the path.
class BaseMap {
 public:
  BaseMap(PathGrid source, PathGrid target, std::vector<Index> mapping)
      : source_(std::move(source)), target_(std::move(target)), mapping_(std::move(mapping)) {
    if (mapping_.size() != source_.size())
      fail(ErrorCode::GridMismatch, "base map must be total on the source grid");
    for (Index i = 0; i < mapping_.size(); ++i)
      if (mapping_[i] >= target_.size())
        fail(ErrorCode::GridMismatch, "base map sends sample " + std::to_string(i) +
                                          " outside the target grid");
  }

  static BaseMap identity_on(const PathGrid& grid) {
    std::vector<Index> m(grid.size());
    for (Index i = 0; i < m.size(); ++i) m[i] = i;
    return BaseMap(grid, grid, std::move(m));
  }

  const PathGrid& source() const { return source_; }
  const PathGrid& target() const { return target_; }
  const std::vector<Index>& mapping() const { return mapping_; }
  Index operator()(Index i) const { return mapping_.at(i); }

  bool is_identity() const {
    if (!(source_ == target_)) return false;
    for (Index i = 0; i < mapping_.size(); ++i)
      if (mapping_[i] != i) return false;
    return true;
  }

 private:
  PathGrid source_;
  PathGrid target_;
  std::vector<Index> mapping_;
};

/// Fibre maps F_{gamma(s_i)} (n2 x n1) over a base map.
class PathMorphism {
 public:
  PathMorphism(BaseMap base, std::vector<Matrix> fibre_maps)
      : base_(std::move(base)), maps_(std::move(fibre_maps)) {
    if (maps_.size() != base_.source().size())
      fail(ErrorCode::DimensionMismatch, "morphism has " + std::to_string(maps_.size()) +
                                             " fibre maps for " +
                                             std::to_string(base_.source().size()) + " samples");
    for (const auto& m : maps_) {
      if (m.rows() != maps_.front().rows() || m.cols() != maps_.front().cols())
        fail(ErrorCode::ShapeMismatch, "fibre maps must share one shape");
      if (!all_finite(m)) fail(ErrorCode::NonFiniteEntry, "fibre map has a non-finite entry");
    }
  }

  const BaseMap& base() const { return base_; }
  Index size() const { return maps_.size(); }
  Eigen::Index rows() const { return maps_.front().rows(); }
  Eigen::Index cols() const { return maps_.front().cols(); }
  const Matrix& at(Index i) const { return maps_.at(i); }
  const std::vector<Matrix>& fibre_maps() const { return maps_; }

 private:
  BaseMap base_;
  std::vector<Matrix> maps_;
};

/// C(s0; gamma, f o gamma) together with its anchor sample.
struct ConjugatorC {
  Index anchor = 0;
  Matrix matrix;
};

using ConsistencyReport = PairReport;

namespace detail {

inline void check_pair_shapes(const PathMorphism& m, const LinearTransport& t1,
                              const LinearTransport& t2) {
  if (!(t1.grid() == m.base().source()))
    fail(ErrorCode::GridMismatch, "first transport is not defined on the morphism's source grid");
  if (!(t2.grid() == m.base().target()))
    fail(ErrorCode::GridMismatch, "second transport is not defined on the morphism's target grid");
  if (m.cols() != t1.dim() || m.rows() != t2.dim())
    fail(ErrorCode::ShapeMismatch, "fibre maps are " + std::to_string(m.rows()) + "x" +
                                       std::to_string(m.cols()) + ", transports have dims " +
                                       std::to_string(t2.dim()) + " and " +
                                       std::to_string(t1.dim()));
}

template <class Residual>
ConsistencyReport scan_pairs(Index n, double tol, Residual&& residual) {
  require_tol(tol);
  PairScan scan;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const auto [res, scale] = residual(i, j);
      scan.update(res, scale, i, j);
    }
  return scan.report(tol);
}

}  // namespace detail

/// Residual of F(j) I1(i->j) - I2(f(i)->f(j)) F(i) over all sample pairs;
/// the verdict is relative to the magnitude of either side.
inline ConsistencyReport check_consistency(const PathMorphism& m, const LinearTransport& t1,
                                           const LinearTransport& t2, double tol = kDefaultTol) {
  detail::check_pair_shapes(m, t1, t2);
  const auto& f = m.base();
  return detail::scan_pairs(m.size(), tol, [&](Index i, Index j) {
    const Matrix h1 = t1.matrix(i, j);
    const Matrix h2 = t2.matrix(f(i), f(j));
    const double res = frobenius(m.at(j) * h1 - h2 * m.at(i));
    return std::pair{res, std::max(frobenius(m.at(j)) * frobenius(h1),
                                   frobenius(h2) * frobenius(m.at(i)))};
  });
}

/// Action of the induced transport on the morphism bundle, from sample i to
/// sample j: I2(f(i)->f(j)) * M * I1(j->i).
inline Matrix induced_transport_apply(const LinearTransport& t1, const LinearTransport& t2,
                                      const BaseMap& base, const Matrix& m_at_i, Index i, Index j) {
  if (m_at_i.rows() != t2.dim() || m_at_i.cols() != t1.dim())
    fail(ErrorCode::ShapeMismatch, "fibre map is " + shape_string(m_at_i));
  if (!(t1.grid() == base.source()) || !(t2.grid() == base.target()))
    fail(ErrorCode::GridMismatch, "transports do not match the base map grids");
  return t2.matrix(base(i), base(j)) * m_at_i * t1.matrix(j, i);
}

/// Is the morphism a section transported by the induced transport?
inline ConsistencyReport check_section_transported(const PathMorphism& m, const LinearTransport& t1,
                                                   const LinearTransport& t2,
                                                   double tol = kDefaultTol) {
  detail::check_pair_shapes(m, t1, t2);
  const auto& f = m.base();
  return detail::scan_pairs(m.size(), tol, [&](Index i, Index j) {
    const Matrix h1 = t1.matrix(j, i);
    const Matrix h2 = t2.matrix(f(i), f(j));
    const double res = frobenius(m.at(j) - h2 * m.at(i) * h1);
    return std::pair{res, std::max(frobenius(m.at(j)),
                                   frobenius(h2) * frobenius(m.at(i)) * frobenius(h1))};
  });
}

/// Largest relative residual of F(i) - I2(f(a)->f(i)) C I1(i->a) over samples.
inline double conjugator_residual(const PathMorphism& m, const LinearTransport& t1,
                                  const LinearTransport& t2, const ConjugatorC& c) {
  detail::check_pair_shapes(m, t1, t2);
  const auto& f = m.base();
  double worst = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    const Matrix h2 = t2.matrix(f(c.anchor), f(i));
    const Matrix h1 = t1.matrix(i, c.anchor);
    const double res = frobenius(m.at(i) - h2 * c.matrix * h1);
    worst = std::max(worst, relative(res, frobenius(h2) * frobenius(c.matrix) * frobenius(h1)));
  }
  return worst;
}

inline ConjugatorC derive_conjugator(const PathMorphism& m, const LinearTransport& t1,
                                     const LinearTransport& t2, Index anchor,
                                     double tol = kDefaultTol) {
  if (anchor >= m.size()) fail(ErrorCode::InvalidArgument, "anchor index out of range");
  const auto report = check_consistency(m, t1, t2, tol);
  if (!report.pass)
    fail(ErrorCode::NotConsistent, "morphism is not consistent with the transport pair (residual " +
                                       std::to_string(report.max_residual) + ")");
  return ConjugatorC{anchor, m.at(anchor)};
}

/// Moves a conjugator to another anchor: C(t0) = I2(f(s0)->f(t0)) C(s0) I1(t0->s0).
inline ConjugatorC reanchor_conjugator(const ConjugatorC& c, const LinearTransport& t1,
                                       const LinearTransport& t2, const BaseMap& base,
                                       Index new_anchor) {
  return ConjugatorC{new_anchor, t2.matrix(base(c.anchor), base(new_anchor)) * c.matrix *
                                     t1.matrix(new_anchor, c.anchor)};
}

/// C(s0) = F2(f(s0))^{-1} C0 F1(s0).
inline ConjugatorC conjugator_from_c0(const Matrix& c0, const FrameFactor& f1, const FrameFactor& f2,
                                      const BaseMap& base, Index anchor) {
  return ConjugatorC{anchor, f2.solve(base(anchor), c0 * f1.at(anchor))};
}

/// Every morphism consistent with the pair: F(i) = F2(f(i))^{-1} C0 F1(i).
inline PathMorphism synthesize_consistent(const Matrix& c0, const FrameFactor& f1,
                                          const FrameFactor& f2, const BaseMap& base) {
  if (!(f1.grid() == base.source()) || !(f2.grid() == base.target()))
    fail(ErrorCode::GridMismatch, "factors do not live on the base map grids");
  if (c0.rows() != f2.dim() || c0.cols() != f1.dim())
    fail(ErrorCode::ShapeMismatch, "C0 is " + shape_string(c0) + ", expected " +
                                       std::to_string(f2.dim()) + "x" + std::to_string(f1.dim()));
  std::vector<Matrix> maps;
  maps.reserve(f1.size());
  for (Index i = 0; i < f1.size(); ++i) maps.push_back(f2.solve(base(i), c0 * f1.at(i)));
  return PathMorphism(base, std::move(maps));
}

/// Pulls the second transport back through invertible fibre maps:
/// I1(s->t) = F(t)^{-1} I2(f(s)->f(t)) F(s), realized by the factor F2(f(s)) F(s).
inline LinearTransport invert_to_transport(const PathMorphism& m, const LinearTransport& t2) {
  if (m.rows() != m.cols())
    fail(ErrorCode::SingularFibreMap, "fibre maps are not square");
  if (!(t2.grid() == m.base().target()))
    fail(ErrorCode::GridMismatch, "transport is not defined on the morphism's target grid");
  if (m.rows() != t2.dim()) fail(ErrorCode::ShapeMismatch, "fibre maps do not match the transport");
  std::vector<Matrix> ms;
  ms.reserve(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    if (!is_invertible(m.at(i)))
      fail(ErrorCode::SingularFibreMap, "fibre map at sample " + std::to_string(i));
    ms.push_back(t2.factor().at(m.base()(i)) * m.at(i));
  }
  return LinearTransport(
      FrameFactor(m.base().source(), FiberSpec(static_cast<int>(m.cols())), std::move(ms)));
}

}  // namespace btk
