#include "vcloc/conic.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "vcloc/error.hpp"

namespace vcloc {

using std::numbers::pi;

bool EllipseParams::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && b > 0.0 && a >= b && theta >= 0.0 &&
         theta < pi;
}

Vec2 EllipseParams::point_at(double t) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double x = a * std::cos(t), y = b * std::sin(t);
  return {cx + c * x - s * y, cy + s * x + c * y};
}

Vec2 EllipseParams::normal_at(double t) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const Vec2 local(b * std::cos(t), a * std::sin(t));
  return Vec2(c * local.x() - s * local.y(), s * local.x() + c * local.y()).normalized();
}

double wrap_half_turn(double theta) {
  double t = std::fmod(theta, pi);
  if (t < 0.0) t += pi;
  if (t >= pi) t -= pi;
  return t;
}

double half_turn_difference(double a, double b) {
  double d = std::fmod(a - b, pi);
  if (d < -pi / 2) d += pi;
  if (d >= pi / 2) d -= pi;
  return d;
}

Conic Conic::from_matrix(const Eigen::Matrix3d& m) {
  const Eigen::Matrix3d s = 0.5 * (m + m.transpose());
  return {s(0, 0), s(0, 1), s(1, 1), s(0, 2), s(1, 2), s(2, 2)};
}

Eigen::Matrix3d Conic::matrix() const {
  Eigen::Matrix3d m;
  m << A(), B(), D(),
       B(), C(), E(),
       D(), E(), F();
  return m;
}

Conic Conic::normalized() const {
  const double norm = matrix().norm();
  if (norm == 0.0) return *this;
  double sign = 1.0;
  if (F() > 0.0 || (F() == 0.0 && A() + C() < 0.0)) sign = -1.0;
  Conic out;
  out.coeffs_ = coeffs_ * (sign / norm);
  return out;
}

double Conic::evaluate(const Vec2& p) const {
  const double x = p.x(), y = p.y();
  return A() * x * x + 2.0 * B() * x * y + C() * y * y + 2.0 * D() * x + 2.0 * E() * y + F();
}

double conic_distance(const Conic& c1, const Conic& c2) {
  const Eigen::Matrix3d m1 = c1.normalized().matrix();
  const Eigen::Matrix3d m2 = c2.normalized().matrix();
  return std::min((m1 - m2).norm(), (m1 + m2).norm());
}

Conic conic_from_params(const EllipseParams& e) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double ia = 1.0 / (e.a * e.a), ib = 1.0 / (e.b * e.b);
  const double A = c * c * ia + s * s * ib;
  const double B = c * s * (ia - ib);
  const double C = s * s * ia + c * c * ib;
  const double D = -(A * e.cx + B * e.cy);
  const double E = -(B * e.cx + C * e.cy);
  const double F = A * e.cx * e.cx + 2.0 * B * e.cx * e.cy + C * e.cy * e.cy - 1.0;
  return Conic(A, B, C, D, E, F).normalized();
}

EllipseParams params_from_conic(const Conic& conic) {
  if (!(conic.minor33() > 0.0)) {
    throw Error(ErrorCode::NotAnEllipse, "A*C - B^2 <= 0");
  }
  Conic c = conic;
  if (c.A() + c.C() < 0.0) c = Conic(-c.A(), -c.B(), -c.C(), -c.D(), -c.E(), -c.F());
  const double det = c.minor33();
  const double cx = (c.B() * c.E() - c.C() * c.D()) / det;
  const double cy = (c.B() * c.D() - c.A() * c.E()) / det;
  const double f0 = c.F() + c.D() * cx + c.E() * cy;  // value at the center
  if (!(f0 < 0.0)) {
    throw Error(ErrorCode::NotAnEllipse, "imaginary or degenerate ellipse");
  }
  // Eigenvalues of [[A,B],[B,C]]: the smaller one belongs to the major axis.
  const double mean = 0.5 * (c.A() + c.C());
  const double half_diff = std::hypot(0.5 * (c.A() - c.C()), c.B());
  const double lmin = mean - half_diff;
  const double lmax = mean + half_diff;
  EllipseParams e;
  e.cx = cx;
  e.cy = cy;
  e.a = std::sqrt(-f0 / lmin);
  e.b = std::sqrt(-f0 / lmax);
  e.theta = wrap_half_turn(0.5 * std::atan2(-2.0 * c.B(), c.C() - c.A()));
  return e;
}

Conic transform_conic(const Conic& c, const Eigen::Matrix3d& h) {
  const double det = h.determinant();
  const double scale = std::pow(h.norm(), 3);
  if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale) {
    throw Error(ErrorCode::SingularHomography, "det(h) ~ 0");
  }
  const Eigen::Matrix3d hinv = h.inverse();
  return Conic::from_matrix(hinv.transpose() * c.matrix() * hinv);
}

Conic patch_to_image(const Conic& patch_conic, double dx, double dy) {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = -dx;
  t(1, 2) = -dy;
  return Conic::from_matrix(t.transpose() * patch_conic.matrix() * t);
}

double algebraic_distance(const Conic& c, const Vec2& p) { return c.evaluate(p); }

double rosin_distance(const EllipseParams& e, const Vec2& p) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double dx = p.x() - e.cx, dy = p.y() - e.cy;
  const double xp = c * dx + s * dy;
  const double yp = -s * dx + c * dy;
  const double a2 = e.a * e.a, b2 = e.b * e.b;
  const double f2 = a2 - b2;

  if (f2 <= 1e-9 * a2) {
    const double r = 0.5 * (e.a + e.b);
    return std::abs(std::hypot(xp, yp) - r);
  }

  // Confocal hyperbola x^2/A - y^2/(f2 - A) = 1 through the point; its
  // intersection with the ellipse approximates the foot of the normal.
  const double X = xp * xp, Y = yp * yp;
  const double sum = X + Y + f2;
  const double delta = std::max(0.0, sum * sum - 4.0 * X * f2);
  const double A = std::clamp(0.5 * (sum - std::sqrt(delta)), 0.0, f2);
  const double bh2 = f2 - A;
  const double term = A * b2 + a2 * bh2;
  const double xi = std::sqrt(std::max(0.0, A * a2 * (b2 + bh2) / term));
  const double yi = std::sqrt(std::max(0.0, b2 * bh2 * (a2 - A) / term));
  return std::hypot(std::abs(xp) - xi, std::abs(yp) - yi);
}

Vec2 level_set_normal(const EllipseParams& e, const Vec2& p) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double dx = p.x() - e.cx, dy = p.y() - e.cy;
  const double gx = (c * dx + s * dy) / (e.a * e.a);
  const double gy = (-s * dx + c * dy) / (e.b * e.b);
  const Vec2 g(c * gx - s * gy, s * gx + c * gy);
  const double n = g.norm();
  return n > 0.0 ? Vec2(g / n) : Vec2(Vec2::Zero());
}

double perimeter(const EllipseParams& e) {
  return pi * (3.0 * (e.a + e.b) - std::sqrt((3.0 * e.a + e.b) * (e.a + 3.0 * e.b)));
}

}  // namespace vcloc
