#pragma once

#include <Eigen/Core>

namespace vcloc {

using Vec2 = Eigen::Vector2d;

/// Parametric ellipse in pixels. Canonical form keeps a >= b > 0 and
/// theta in [0, pi).
struct EllipseParams {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;

  bool valid() const;
  /// Boundary point at parametric angle t.
  Vec2 point_at(double t) const;
  /// Outward unit normal at parametric angle t.
  Vec2 normal_at(double t) const;
};

/// Wraps an orientation into [0, pi).
double wrap_half_turn(double theta);
/// Signed difference a - b folded into [-pi/2, pi/2).
double half_turn_difference(double a, double b);

/// Symmetric conic [[A,B,D],[B,C,E],[D,E,F]] stored as its six coefficients,
/// so that p^T M p = A x^2 + 2B xy + C y^2 + 2D x + 2E y + F.
class Conic {
 public:
  Conic() = default;
  Conic(double a, double b, double c, double d, double e, double f)
      : coeffs_{a, b, c, d, e, f} {}

  /// Symmetric part of `m` is used.
  static Conic from_matrix(const Eigen::Matrix3d& m);

  Eigen::Matrix3d matrix() const;
  const Eigen::Matrix<double, 6, 1>& coeffs() const { return coeffs_; }

  double A() const { return coeffs_[0]; }
  double B() const { return coeffs_[1]; }
  double C() const { return coeffs_[2]; }
  double D() const { return coeffs_[3]; }
  double E() const { return coeffs_[4]; }
  double F() const { return coeffs_[5]; }

  /// A*C - B^2, the determinant of the leading 2x2 block.
  double minor33() const { return A() * C() - B() * B(); }
  bool is_ellipse() const { return minor33() > 0.0; }

  /// ||M||_F = 1 with F <= 0 (falls back to A + C >= 0 when F == 0).
  Conic normalized() const;
  /// Raw evaluation p^T M p with p = (x, y, 1).
  double evaluate(const Vec2& p) const;

 private:
  Eigen::Matrix<double, 6, 1> coeffs_ = Eigen::Matrix<double, 6, 1>::Zero();
};

/// Smallest |1 - <c1,c2>| style distance between normalized conics; zero iff
/// they are equal up to scale.
double conic_distance(const Conic& c1, const Conic& c2);

Conic conic_from_params(const EllipseParams& e);
/// Throws NotAnEllipse unless A*C - B^2 > 0 and the conic is real.
EllipseParams params_from_conic(const Conic& c);

/// Conic under the point map p -> h p: result = h^{-T} c h^{-1}.
/// Throws SingularHomography when h is not invertible.
Conic transform_conic(const Conic& c, const Eigen::Matrix3d& h);

/// Maps a conic detected in a patch whose origin sits at (dx, dy) in the
/// full image back to image coordinates (C2 = T^T C1 T).
Conic patch_to_image(const Conic& patch_conic, double dx, double dy);

/// p^T C p with p = (x, y, 1). Callers normalize C (||C||_F = 1) first when the
/// value is compared across conics.
double algebraic_distance(const Conic& c, const Vec2& p);

/// Rosin's confocal-hyperbola approximation of the orthogonal distance from p
/// to the ellipse boundary.
double rosin_distance(const EllipseParams& e, const Vec2& p);

/// Outward unit normal of the confocal-scaled ellipse through p (the
/// direction of increasing x'^2/a^2 + y'^2/b^2). Zero at the center.
Vec2 level_set_normal(const EllipseParams& e, const Vec2& p);

/// Ramanujan's perimeter approximation pi [3(a+b) - sqrt((3a+b)(a+3b))].
double perimeter(const EllipseParams& e);

}  // namespace vcloc
