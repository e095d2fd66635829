#include "vcloc/observability.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace vcloc {

namespace {

constexpr double kJacobianStep = 1e-5;
constexpr double kTimeStep = 1e-2;  // only for the rotation-output derivatives
constexpr double kRopeDegenerate = 1e-6;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Taylor coefficients of the flow up to degree `order`.
struct FlowSeries {
  std::vector<Mat3> r;
  std::vector<Vec3> p, v;
};

FlowSeries flow_series(const FilterState& x, const ImuSample& u, int order,
                       const InputDerivatives& d) {
  std::vector<Vec3> w(order + 1, Vec3::Zero()), a(order + 1, Vec3::Zero());
  w[0] = u.w;
  a[0] = u.a;
  for (int k = 1; k <= order; ++k) {
    if (k - 1 < static_cast<int>(d.w_dot.size())) w[k] = d.w_dot[k - 1] / factorial(k);
    if (k - 1 < static_cast<int>(d.a_dot.size())) a[k] = d.a_dot[k - 1] / factorial(k);
  }
  FlowSeries s;
  s.r.assign(order + 1, Mat3::Zero());
  s.p.assign(order + 1, Vec3::Zero());
  s.v.assign(order + 1, Vec3::Zero());
  s.r[0] = x.R.matrix();
  s.p[0] = x.p;
  s.v[0] = x.v;
  for (int k = 0; k < order; ++k) {
    // R' = R w^,  v' = R a - g,  p' = v
    Mat3 dr = Mat3::Zero();
    Vec3 dv = Vec3::Zero();
    for (int j = 0; j <= k; ++j) {
      dr += s.r[j] * hat(w[k - j]);
      dv += s.r[j] * a[k - j];
    }
    if (k == 0) dv -= kGravityVec;
    s.r[k + 1] = dr / (k + 1);
    s.v[k + 1] = dv / (k + 1);
    s.p[k + 1] = s.v[k] / (k + 1);
  }
  return s;
}

Rotation3 rotation_at(const FlowSeries& s, double tau) {
  Mat3 m = Mat3::Zero();
  double pw = 1.0;
  for (const auto& rk : s.r) {
    m += pw * rk;
    pw *= tau;
  }
  return Rotation3::project(m);
}

}  // namespace

VecX lie_derivatives(const FilterState& x, const ImuSample& input, int order, const UavPose& uav,
                     const InputDerivatives& derivs, const Rotation3* r_ref) {
  order = std::max(0, order);
  const int m = static_cast<int>(x.t_f.size());
  const int rows_per = 3 + 3 * m + 1;
  const FlowSeries s = flow_series(x, input, order, derivs);
  const Rotation3 ref = r_ref ? *r_ref : x.R;
  const Mat3 rcg = uav.r_cg.matrix();

  // Rope: Taylor series of sqrt(rho . rho).
  std::vector<double> q(order + 1, 0.0), sq(order + 1, 0.0);
  std::vector<Vec3> rho(s.p);
  rho[0] -= uav.p_gb;
  for (int k = 0; k <= order; ++k) {
    for (int j = 0; j <= k; ++j) q[k] += rho[j].dot(rho[k - j]);
  }
  sq[0] = std::sqrt(q[0]);
  const bool rope_ok = sq[0] >= kRopeDegenerate;
  for (int k = 1; k <= order && rope_ok; ++k) {
    double acc = q[k];
    for (int j = 1; j < k; ++j) acc -= sq[j] * sq[k - j];
    sq[k] = acc / (2.0 * sq[0]);
  }

  auto y_rot = [&](double tau) { return log_so3(ref.inverse() * rotation_at(s, tau)); };
  const double h = kTimeStep;
  const Vec3 g0 = y_rot(0.0);
  Vec3 gp1 = g0, gm1 = g0, gp2 = g0, gm2 = g0;
  if (order >= 1) {
    gp1 = y_rot(h);
    gm1 = y_rot(-h);
  }
  if (order >= 3) {
    gp2 = y_rot(2 * h);
    gm2 = y_rot(-2 * h);
  }

  VecX out = VecX::Zero(rows_per * (order + 1));
  for (int k = 0; k <= order; ++k) {
    const int base = k * rows_per;
    const double kf = factorial(k);
    Vec3 dr;
    switch (k) {
      case 0: dr = g0; break;
      case 1: dr = (gp1 - gm1) / (2 * h); break;
      case 2: dr = (gp1 - 2 * g0 + gm1) / (h * h); break;
      case 3: dr = (gp2 - 2 * gp1 + 2 * gm1 - gm2) / (2 * h * h * h); break;
      default: dr = Vec3::Zero(); break;  // beyond the stencils provided
    }
    out.segment<3>(base) = dr;
    for (int i = 0; i < m; ++i) {
      Vec3 y = rcg * (s.p[k] + s.r[k] * x.t_f[i]);
      if (k == 0) y += rcg * (-uav.p_gb) + uav.t_cb + x.dt_cb;
      out.segment<3>(base + 3 + 3 * i) = kf * y;
    }
    double rope = rope_ok ? kf * sq[k] : 0.0;
    if (k == 0 && rope_ok) rope -= x.l;
    out[base + rows_per - 1] = rope;
  }
  return out;
}

MatX observability_matrix(const FilterState& x, const ImuSample& input, int order,
                          const UavPose& uav, const InputDerivatives& derivs) {
  order = std::max(0, order);
  const int n = x.dim();
  const int m = static_cast<int>(x.t_f.size());
  const int rows_per = 3 + 3 * m + 1;
  MatX jac(rows_per * (order + 1), n);
  for (int j = 0; j < n; ++j) {
    VecX step = VecX::Zero(n);
    step[j] = kJacobianStep;
    const VecX plus = lie_derivatives(oplus(x, step), input, order, uav, derivs, &x.R);
    const VecX minus = lie_derivatives(oplus(x, -step), input, order, uav, derivs, &x.R);
    jac.col(j) = (plus - minus) / (2.0 * kJacobianStep);
  }
  if ((x.p - uav.p_gb).norm() < kRopeDegenerate) {
    for (int k = 0; k <= order; ++k) jac.row(k * rows_per + rows_per - 1).setZero();
  }
  return jac;
}

ObservabilityReport rank_report(const MatX& m, double tol_rel) {
  ObservabilityReport r;
  r.tangent_dim = static_cast<int>(m.cols());
  Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullV);
  r.singular_values = svd.singularValues();
  const double s1 = r.singular_values.size() > 0 ? r.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    if (s1 > 0.0 && r.singular_values[i] > tol_rel * s1) ++r.rank;
  }
  r.deficient_directions = svd.matrixV().rightCols(r.tangent_dim - r.rank);
  return r;
}

}  // namespace vcloc
