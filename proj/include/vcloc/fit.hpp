#pragma once

#include <Eigen/Core>
#include <span>

#include "vcloc/conic.hpp"

namespace vcloc {

using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Similarity applied to points before they enter a scatter matrix:
/// p_n = (p - offset) * scale. Fixed per detection patch so accumulators
/// built from different point sets stay additive.
struct FitNormalization {
  Vec2 offset = Vec2::Zero();
  double scale = 1.0;

  /// Patch-centered normalization mapping the half-diagonal to sqrt(2).
  static FitNormalization for_patch(const Vec2& center, double half_diagonal);

  Vec2 apply(const Vec2& p) const { return (p - offset) * scale; }
  /// Homogeneous 3x3 form of apply().
  Eigen::Matrix3d matrix() const;
  bool operator==(const FitNormalization&) const = default;
};

/// Sum of alpha_i^T alpha_i with alpha = (x^2, xy, y^2, x, y, 1) over
/// normalized points.
struct ScatterAccumulator {
  FitNormalization norm;
  Mat6 s = Mat6::Zero();
  std::size_t n = 0;

  ScatterAccumulator() = default;
  explicit ScatterAccumulator(const FitNormalization& normalization) : norm(normalization) {}

  void add(const Vec2& p);
  /// Throws DegenerateData when the normalizations differ.
  ScatterAccumulator& merge(const ScatterAccumulator& other);
};

ScatterAccumulator accumulate(ScatterAccumulator acc, std::span<const Vec2> points);
ScatterAccumulator merge(const ScatterAccumulator& a, const ScatterAccumulator& b);

/// Direct least-squares ellipse fit (constraint 4AC - B'^2 = 1 with B' = 2B)
/// solved through the 3x3 block reduction of the generalized eigenproblem.
/// The returned conic is in pixel coordinates and normalized.
/// Throws DegenerateData (n < 6 or rank-deficient scatter) or NoEllipseSolution.
Conic fit_direct(const ScatterAccumulator& acc);

/// accumulate() + fit_direct() using a normalization derived from the points'
/// own centroid and RMS radius.
Conic fit_points(std::span<const Vec2> points);

/// Sum over points of (p^T C p)^2 for a Frobenius-normalized conic.
double algebraic_residual(const Conic& c, std::span<const Vec2> points);

}  // namespace vcloc
