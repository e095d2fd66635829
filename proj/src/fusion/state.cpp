#include <cmath>

#include "vcloc/fusion.hpp"

namespace vcloc {

FilterState oplus(const FilterState& x, const VecX& xi) {
  FilterState y = x;
  y.R = x.R * exp_so3(xi.segment<3>(idx::R));
  y.p += xi.segment<3>(idx::P);
  y.v += xi.segment<3>(idx::V);
  y.l += xi[idx::L];
  y.dt_cb += xi.segment<3>(idx::DT);
  for (std::size_t i = 0; i < y.t_f.size(); ++i) {
    y.t_f[i] += xi.segment<3>(idx::TF + 3 * static_cast<int>(i));
  }
  return y;
}

VecX ominus(const FilterState& y, const FilterState& x) {
  VecX xi(x.dim());
  xi.segment<3>(idx::R) = log_so3(x.R.inverse() * y.R);
  xi.segment<3>(idx::P) = y.p - x.p;
  xi.segment<3>(idx::V) = y.v - x.v;
  xi[idx::L] = y.l - x.l;
  xi.segment<3>(idx::DT) = y.dt_cb - x.dt_cb;
  for (std::size_t i = 0; i < x.t_f.size(); ++i) {
    xi.segment<3>(idx::TF + 3 * static_cast<int>(i)) = y.t_f[i] - x.t_f[i];
  }
  return xi;
}

FilterState integrate(const FilterState& x, const Vec3& w, const Vec3& a, double dt,
                      double max_dt) {
  FilterState y = x;
  const int steps = std::max(1, static_cast<int>(std::ceil(dt / max_dt - 1e-9)));
  const double h = dt / steps;
  const Rotation3 half = exp_so3(0.5 * h * w);
  const Rotation3 full = exp_so3(h * w);
  for (int k = 0; k < steps; ++k) {
    // R(tau) = R0 exp(w tau) is exact; RK4 handles p and v.
    const Rotation3 r0 = y.R;
    const Rotation3 rm = r0 * half;
    const Rotation3 r1 = r0 * full;
    const Vec3 k1v = r0 * a - kGravityVec;
    const Vec3 k2v = rm * a - kGravityVec;
    const Vec3& k3v = k2v;
    const Vec3 k4v = r1 * a - kGravityVec;
    const Vec3 k1p = y.v;
    const Vec3 k2p = y.v + 0.5 * h * k1v;
    const Vec3 k3p = y.v + 0.5 * h * k2v;
    const Vec3 k4p = y.v + h * k3v;
    y.p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    y.v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    y.R = r1;
  }
  return y;
}

Vec3 predict_marker(const FilterState& x, const MarkerMeas& m) {
  const Vec3 marker = x.p + x.R * x.t_f.at(m.marker);
  return m.r_cg * (marker - m.p_gb) + m.t_cb + x.dt_cb;
}

double predict_rope(const FilterState& x, const Vec3& p_gb) { return (x.p - p_gb).norm() - x.l; }

}  // namespace vcloc
