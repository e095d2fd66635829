#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "vcloc/sim.hpp"
#include "internal.hpp"

namespace vcloc {

namespace {

struct PathPoint {
  Eigen::Vector2d pos;
  Eigen::Vector2d tangent;
  Eigen::Vector2d curvature;  // d^2 S / ds^2
};

double turn_radius(const SurveyPath& p) {
  return p.legs > 1 ? 0.5 * p.extent / (p.legs - 1) : 0.0;
}

double path_length(const SurveyPath& p) {
  return p.legs * p.leg_length + (p.legs - 1) * std::numbers::pi * turn_radius(p);
}

// Arc-length parameterized boustrophedon; the first and last legs extend
// straight beyond the ends.
PathPoint path_point(const SurveyPath& p, double s) {
  const double rad = turn_radius(p);
  const double turn_len = std::numbers::pi * rad;
  const double spacing = 2.0 * rad;
  PathPoint out;
  out.curvature.setZero();
  auto leg_point = [&](int i, double u) {
    const bool fwd = i % 2 == 0;
    out.pos = {fwd ? u : p.leg_length - u, i * spacing};
    out.tangent = {fwd ? 1.0 : -1.0, 0.0};
  };
  if (s < 0.0) {
    leg_point(0, s);
    return out;
  }
  for (int i = 0; i < p.legs; ++i) {
    if (s <= p.leg_length || i == p.legs - 1) {
      leg_point(i, s);
      return out;
    }
    s -= p.leg_length;
    if (s <= turn_len) {
      const double phi = s / rad;
      const double sn = std::sin(phi), cs = std::cos(phi);
      const double y0 = i * spacing + rad;
      if (i % 2 == 0) {  // left turn at x = leg_length
        out.pos = {p.leg_length + rad * sn, y0 - rad * cs};
        out.tangent = {cs, sn};
        out.curvature = Eigen::Vector2d(-sn, cs) / rad;
      } else {  // right turn at x = 0
        out.pos = {-rad * sn, y0 - rad * cs};
        out.tangent = {-cs, sn};
        out.curvature = Eigen::Vector2d(sn, cs) / rad;
      }
      return out;
    }
    s -= turn_len;
  }
  return out;  // unreachable
}

struct ArcLength {
  double s, sdot, sddot;
};

// Forward pass, cosine reversal, backward pass, cosine reversal, repeat.
ArcLength arc_length(const SurveyPath& p, double t) {
  const double len = path_length(p);
  const double v = p.speed;
  const double tf = len / v;
  const double tr = p.reversal_time;
  const double period = 2.0 * (tf + tr);
  double tau = std::fmod(t, period);
  if (tau < 0.0) tau += period;
  const double w = std::numbers::pi / tr;
  if (tau < tf) return {v * tau, v, 0.0};
  tau -= tf;
  if (tau < tr) return {len + v / w * std::sin(w * tau), v * std::cos(w * tau), -v * w * std::sin(w * tau)};
  tau -= tr;
  if (tau < tf) return {len - v * tau, -v, 0.0};
  tau -= tf;
  return {-v / w * std::sin(w * tau), -v * std::cos(w * tau), v * w * std::sin(w * tau)};
}

}  // namespace

UavState uav_state(const SurveyPath& path, double t) {
  UavState u;
  u.r_gb = exp_so3(Vec3(0.0, 0.0, path.yaw));
  if (path.static_pivot) {
    u.p = path.origin;
    return u;
  }
  const ArcLength al = arc_length(path, t);
  const PathPoint pp = path_point(path, al.s);
  const Eigen::Vector2d vel = pp.tangent * al.sdot;
  const Eigen::Vector2d acc = pp.curvature * (al.sdot * al.sdot) + pp.tangent * al.sddot;
  u.p = path.origin + Vec3(pp.pos.x(), pp.pos.y(), 0.0);
  u.v = Vec3(vel.x(), vel.y(), 0.0);
  u.a = Vec3(acc.x(), acc.y(), 0.0);
  return u;
}

std::vector<double> path_breakpoints(const SurveyPath& path, double t0, double t1) {
  std::vector<double> out;
  if (path.static_pivot || path.legs < 2) return out;
  // Curvature switches at the leg/turn junctions.
  std::vector<double> junctions;
  const double turn_len = std::numbers::pi * turn_radius(path);
  double s = 0.0;
  for (int i = 0; i + 1 < path.legs; ++i) {
    s += path.leg_length;
    junctions.push_back(s);
    s += turn_len;
    junctions.push_back(s);
  }
  const double len = path_length(path);
  const double tf = len / path.speed;
  const double period = 2.0 * (tf + path.reversal_time);
  const double first = std::floor(t0 / period);
  for (double k = first; k * period <= t1; k += 1.0) {
    for (double sj : junctions) {
      for (double t : {k * period + sj / path.speed,
                       k * period + tf + path.reversal_time + (len - sj) / path.speed}) {
        if (t > t0 && t < t1) out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double pendulum_lambda(const PendulumState& s, const Vec3& a_pivot) {
  return (s.rdot.squaredNorm() - s.r.dot(kGravityVec + a_pivot)) / s.r.squaredNorm();
}

namespace {

PendulumState rk4(const PendulumState& s, const SurveyPath& path, double t, double h) {
  auto f = [&](const PendulumState& x, double tt) {
    const Vec3 a_b = uav_state(path, tt).a;
    const double lambda = pendulum_lambda(x, a_b);
    return PendulumState{x.rdot, -kGravityVec - lambda * x.r - a_b};
  };
  auto add = [](const PendulumState& x, const PendulumState& d, double k) {
    return PendulumState{x.r + k * d.r, x.rdot + k * d.rdot};
  };
  // The end evaluations are nudged inside the interval so that a forcing jump
  // at either end is seen from the correct side.
  constexpr double kNudge = 1e-9;
  const PendulumState k1 = f(s, t + kNudge);
  const PendulumState k2 = f(add(s, k1, h / 2), t + h / 2);
  const PendulumState k3 = f(add(s, k2, h / 2), t + h / 2);
  const PendulumState k4 = f(add(s, k3, h), t + h - kNudge);
  return {s.r + h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
          s.rdot + h / 6.0 * (k1.rdot + 2.0 * k2.rdot + 2.0 * k3.rdot + k4.rdot)};
}

}  // namespace

PendulumState pendulum_step(const PendulumState& s, const SurveyPath& path, double t, double h) {
  // Split at pivot-acceleration discontinuities so RK4 keeps its order.
  PendulumState x = s;
  double tc = t;
  for (double tb : path_breakpoints(path, t, t + h)) {
    if (tb - tc > 1e-8) {
      x = rk4(x, path, tc, tb - tc);
      tc = tb;
    }
  }
  return t + h - tc > 1e-8 ? rk4(x, path, tc, t + h - tc) : x;
}

Rotation3 load_attitude(const Vec3& r, double heading) {
  const Vec3 z = -r.normalized();
  const Vec3 h(std::cos(heading), std::sin(heading), 0.0);
  const Vec3 x = (h - h.dot(z) * z).normalized();
  Mat3 m;
  m.col(0) = x;
  m.col(1) = z.cross(x);
  m.col(2) = z;
  return Rotation3::from_matrix(m, 1e-9);
}

}  // namespace vcloc
