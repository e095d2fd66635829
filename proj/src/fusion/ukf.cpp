#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "vcloc/error.hpp"
#include "vcloc/fusion.hpp"

namespace vcloc {

SigmaWeights sigma_weights(int n, double alpha, double beta, double kappa) {
  if (n < 1) throw Error(ErrorCode::InvalidScaling, "tangent dimension must be >= 1");
  const double lambda = alpha * alpha * (n + kappa) - n;
  if (!(n + lambda > 0.0)) {
    throw Error(ErrorCode::InvalidScaling, "n + lambda must be positive");
  }
  SigmaWeights w;
  w.lambda = lambda;
  w.wm = VecX::Constant(2 * n + 1, 1.0 / (2.0 * (n + lambda)));
  w.wc = w.wm;
  w.wm[0] = lambda / (n + lambda);
  w.wc[0] = w.wm[0] + (1.0 - alpha * alpha + beta);
  return w;
}

MatX psd_sqrt(const MatX& p) {
  Eigen::LLT<MatX> llt(p);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LDLT<MatX> ldlt(p);
  const VecX d = ldlt.vectorD();
  const double scale = std::max(1e-300, p.diagonal().cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || d.minCoeff() < -1e-9 * scale) {
    throw Error(ErrorCode::CovarianceNotPSD, "covariance has a negative direction");
  }
  const MatX l = ldlt.matrixL();
  MatX s = l * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return ldlt.transpositionsP().transpose() * s;
}

namespace {

struct SigmaSet {
  std::vector<VecX> xi;     // state-tangent part
  std::vector<VecX> noise;  // augmented noise part
  SigmaWeights w;
};

SigmaSet make_sigma(const MatX& p, const MatX& qn, const UkfConfig& cfg) {
  const int nx = static_cast<int>(p.rows());
  const int nn = static_cast<int>(qn.rows());
  const int n = nx + nn;
  MatX aug = MatX::Zero(n, n);
  aug.topLeftCorner(nx, nx) = p;
  aug.bottomRightCorner(nn, nn) = qn;

  SigmaSet s;
  s.w = sigma_weights(n, cfg.alpha, cfg.beta, cfg.kappa);
  const MatX sq = std::sqrt(n + s.w.lambda) * psd_sqrt(aug);
  s.xi.reserve(2 * n + 1);
  s.noise.reserve(2 * n + 1);
  s.xi.push_back(VecX::Zero(nx));
  s.noise.push_back(VecX::Zero(nn));
  for (int sign : {1, -1}) {
    for (int i = 0; i < n; ++i) {
      const VecX col = sign * sq.col(i);
      s.xi.push_back(col.head(nx));
      s.noise.push_back(col.tail(nn));
    }
  }
  return s;
}

Belief correct(const Belief& b, const MatX& pxy, const MatX& pyy, const VecX& innov,
               const UkfConfig& cfg, UpdateInfo* info) {
  Eigen::LDLT<MatX> ldlt(pyy);
  const double scale = pyy.diagonal().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(scale > 0.0) || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * scale) {
    throw Error(ErrorCode::SingularInnovationCovariance, "P_yy is not positive definite");
  }
  const double nis = innov.dot(ldlt.solve(innov));
  if (info) {
    info->nis = nis;
    info->rejected = false;
  }
  if (cfg.gate) {
    const boost::math::chi_squared dist(static_cast<double>(innov.size()));
    if (nis > boost::math::quantile(dist, cfg.gate_probability)) {
      if (info) info->rejected = true;
      return b;
    }
  }
  const MatX k = ldlt.solve(pxy.transpose()).transpose();
  Belief out{oplus(b.x, k * innov), b.P - k * pyy * k.transpose()};
  symmetrize(out.P);
  return out;
}

Belief update_rotation(const Belief& b, const RotationMeas& m, const MatX& r,
                       const UkfConfig& cfg, UpdateInfo* info) {
  const SigmaSet s = make_sigma(b.P, r, cfg);
  const std::size_t ns = s.xi.size();
  const Rotation3 ref_inv = m.r_ref.inverse();
  std::vector<Rotation3> ys;
  ys.reserve(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const Rotation3 ri = b.x.R * exp_so3(s.xi[i].segment<3>(idx::R));
    ys.push_back(ref_inv * ri * exp_so3(s.noise[i]));
  }
  // Weighted mean on the group by fixed-point iteration.
  Rotation3 mean = ys[0];
  for (int it = 0; it < cfg.rotation_mean_iterations; ++it) {
    Vec3 delta = Vec3::Zero();
    for (std::size_t i = 0; i < ns; ++i) delta += s.w.wm[i] * log_so3(mean.inverse() * ys[i]);
    mean = mean * exp_so3(delta);
    if (delta.norm() < cfg.rotation_mean_tol) break;
  }
  MatX pyy = MatX::Zero(3, 3);
  MatX pxy = MatX::Zero(b.P.rows(), 3);
  for (std::size_t i = 0; i < ns; ++i) {
    const Vec3 e = log_so3(mean.inverse() * ys[i]);
    pyy += s.w.wc[i] * e * e.transpose();
    pxy += s.w.wc[i] * s.xi[i] * e.transpose();
  }
  // Observed value is the identity: innovation = I (-) mean.
  const VecX innov = log_so3(mean.inverse());
  return correct(b, pxy, pyy, innov, cfg, info);
}

}  // namespace

Belief propagate(const Belief& b, const ImuSample& imu, double dt, const NoiseConfig& q,
                 const UkfConfig& cfg) {
  if (!(dt > 0.0)) throw Error(ErrorCode::NonPositiveDt, "dt must be positive");
  MatX qn = MatX::Zero(6, 6);
  qn.topLeftCorner(3, 3).diagonal().setConstant(q.gyro * dt);
  qn.bottomRightCorner(3, 3).diagonal().setConstant(q.accel * dt);
  const SigmaSet s = make_sigma(b.P, qn, cfg);

  // Each sigma point carries its own noise sample, applied as a rate held over dt.
  std::vector<FilterState> out;
  out.reserve(s.xi.size());
  for (std::size_t i = 0; i < s.xi.size(); ++i) {
    const FilterState xi = oplus(b.x, s.xi[i]);
    const Vec3 w = imu.w + s.noise[i].head<3>() / dt;
    const Vec3 a = imu.a + s.noise[i].tail<3>() / dt;
    out.push_back(integrate(xi, w, a, dt, cfg.max_dt));
  }

  Belief next{out[0], MatX::Zero(b.P.rows(), b.P.cols())};
  for (std::size_t i = 1; i < out.size(); ++i) {
    const VecX e = ominus(out[i], out[0]);
    next.P.noalias() += s.w.wc[i] * e * e.transpose();
  }
  // The slow parameters are pure random walks; their noise enters linearly.
  next.P(idx::L, idx::L) += q.rope * dt;
  next.P.block(idx::DT, idx::DT, 3, 3).diagonal().array() += q.misalign * dt;
  for (int k = idx::TF; k < next.P.rows(); ++k) next.P(k, k) += q.fiducial * dt;
  symmetrize(next.P);
  return next;
}

Belief update_vector(const Belief& b, const VectorModel& h, const VecX& y, const MatX& r,
                     const UkfConfig& cfg, UpdateInfo* info) {
  const SigmaSet s = make_sigma(b.P, r, cfg);
  const std::size_t ns = s.xi.size();
  std::vector<VecX> ys;
  ys.reserve(ns);
  VecX mean = VecX::Zero(y.size());
  for (std::size_t i = 0; i < ns; ++i) {
    ys.push_back(h(oplus(b.x, s.xi[i]), s.noise[i]));
    mean += s.w.wm[i] * ys.back();
  }
  MatX pyy = MatX::Zero(y.size(), y.size());
  MatX pxy = MatX::Zero(b.P.rows(), y.size());
  for (std::size_t i = 0; i < ns; ++i) {
    const VecX e = ys[i] - mean;
    pyy += s.w.wc[i] * e * e.transpose();
    pxy += s.w.wc[i] * s.xi[i] * e.transpose();
  }
  return correct(b, pxy, pyy, y - mean, cfg, info);
}

Belief update(const Belief& b, const MeasurementEvent& meas, const UkfConfig& cfg,
              UpdateInfo* info) {
  if (const auto* m = std::get_if<RotationMeas>(&meas.kind)) {
    if (meas.noise.rows() != 3 || meas.noise.cols() != 3) {
      throw Error(ErrorCode::InvalidScenario, "rotation noise must be 3x3");
    }
    return update_rotation(b, *m, meas.noise, cfg, info);
  }
  if (const auto* m = std::get_if<MarkerMeas>(&meas.kind)) {
    if (meas.noise.rows() != 3 || meas.noise.cols() != 3) {
      throw Error(ErrorCode::InvalidScenario, "marker noise must be 3x3");
    }
    if (m->marker >= b.x.t_f.size()) {
      throw Error(ErrorCode::InvalidScenario, "marker index out of range");
    }
    const MarkerMeas mm = *m;
    const VectorModel h = [mm](const FilterState& x, const VecX& n) -> VecX {
      return predict_marker(x, mm) + n;
    };
    return update_vector(b, h, m->y, meas.noise, cfg, info);
  }
  const auto& m = std::get<RopeMeas>(meas.kind);
  if (meas.noise.rows() != 1 || meas.noise.cols() != 1) {
    throw Error(ErrorCode::InvalidScenario, "rope noise must be 1x1");
  }
  if ((b.x.p - m.p_gb).norm() <= 1e-6) {
    throw Error(ErrorCode::DegenerateRopeGeometry, "load coincides with the pivot");
  }
  const Vec3 p_gb = m.p_gb;
  const VectorModel h = [p_gb](const FilterState& x, const VecX& n) -> VecX {
    return VecX::Constant(1, predict_rope(x, p_gb) + n[0]);
  };
  return update_vector(b, h, VecX::Zero(1), meas.noise, cfg, info);
}

}  // namespace vcloc
