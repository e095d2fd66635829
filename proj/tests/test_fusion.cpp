#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "oracles.hpp"
#include "vcloc/error.hpp"
#include "vcloc/fusion.hpp"

using namespace vcloc;

namespace {

FilterState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  FilterState x(2);
  x.R = exp_so3(oracle::random_axis_angle(rng, 3.0));
  x.p = Vec3(g(rng), g(rng), g(rng)) * 5.0;
  x.v = Vec3(g(rng), g(rng), g(rng));
  x.l = 5.0 + g(rng);
  x.dt_cb = Vec3(g(rng), g(rng), g(rng)) * 0.1;
  for (auto& f : x.t_f) f = Vec3(g(rng), g(rng), g(rng)) * 0.3;
  return x;
}

MatX random_spd(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  const MatX a = MatX::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return g(rng); });
  MatX p = scale * (a * a.transpose() / n + 0.1 * MatX::Identity(n, n));
  return 0.5 * (p + p.transpose());
}

double min_eig(const MatX& p) { return Eigen::SelfAdjointEigenSolver<MatX>(p).eigenvalues().minCoeff(); }

}  // namespace

TEST(State, OplusOminusInverse) {
  std::mt19937_64 rng(60);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const FilterState x = random_state(rng);
    VecX xi(x.dim());
    for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = g(rng);
    xi.head<3>() = oracle::random_axis_angle(rng, 1.5);
    EXPECT_LT((ominus(oplus(x, xi), x) - xi).norm(), 1e-9);
  }
  EXPECT_EQ(FilterState(2).dim(), 19);
  EXPECT_EQ(FilterState(3).dim(), 22);
}

TEST(Ukf, SigmaWeights) {
  for (int n : {1, 5, 19, 25}) {
    const SigmaWeights w = sigma_weights(n, 1.0, 0.0, 0.0);
    EXPECT_EQ(w.wm.size(), 2 * n + 1);
    EXPECT_NEAR(w.wm.sum(), 1.0, 1e-12);
    EXPECT_NEAR(w.wc.sum(), 1.0, 1e-12);
  }
  const SigmaWeights w = sigma_weights(4, 0.5, 2.0, 0.0);
  EXPECT_NEAR(w.lambda, 0.25 * 4 - 4, 1e-12);
  EXPECT_NEAR(w.wc[0], w.wm[0] + (1 - 0.25 + 2), 1e-12);
  try {
    sigma_weights(0, 1, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidScaling);
  }
  EXPECT_THROW(sigma_weights(3, 1.0, 0.0, -3.0), Error);
}

TEST(Ukf, PsdSqrt) {
  std::mt19937_64 rng(61);
  const MatX p = random_spd(rng, 7, 2.0);
  const MatX s = psd_sqrt(p);
  EXPECT_LT((s * s.transpose() - p).norm(), 1e-12);
  // Semidefinite: rank one.
  const VecX v = VecX::LinSpaced(5, 1, 5);
  const MatX r1 = v * v.transpose();
  const MatX s1 = psd_sqrt(r1);
  EXPECT_LT((s1 * s1.transpose() - r1).norm(), 1e-10);
  MatX neg = MatX::Identity(3, 3);
  neg(2, 2) = -1.0;
  try {
    psd_sqrt(neg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CovarianceNotPSD);
  }
}

TEST(Ukf, LinearUpdateMatchesKalman) {
  std::mt19937_64 rng(62);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const FilterState x0 = random_state(rng);
    const int n = x0.dim();
    const MatX p0 = random_spd(rng, n, 0.05);
    // h depends linearly on the vector part of the tangent (R frozen).
    const int m = 4;
    MatX h = MatX::Zero(m, n);
    h.rightCols(n - 3) = MatX::NullaryExpr(m, n - 3, [&](Eigen::Index, Eigen::Index) { return g(rng); });
    const MatX r = random_spd(rng, m, 0.01);
    const VecX y = VecX::NullaryExpr(m, [&](Eigen::Index) { return g(rng); });
    const VectorModel model = [&](const FilterState& x, const VecX& noise) -> VecX {
      return h * ominus(x, x0) + noise;
    };
    UpdateInfo info;
    const Belief post = update_vector({x0, p0}, model, y, r, {}, &info);

    oracle::Kf kf{VecX::Zero(n), p0};
    kf.update(h, y, r);
    EXPECT_LT((ominus(post.x, x0) - kf.x).norm(), 1e-8);
    EXPECT_LT((post.P - kf.p).cwiseAbs().maxCoeff(), 1e-8);
    const MatX s = h * p0 * h.transpose() + r;
    EXPECT_NEAR(info.nis, y.dot(s.ldlt().solve(y)), 1e-8);
  }
}

TEST(Ukf, GateRejectsOutlier) {
  FilterState x0(2);
  x0.l = 7.0;
  x0.p = Vec3(0, 0, -7.0);
  const MatX p0 = MatX::Identity(19, 19) * 1e-4;
  MeasurementEvent ev;
  ev.kind = RopeMeas{Vec3::Zero()};
  ev.noise = MatX::Constant(1, 1, 1e-4);
  UkfConfig cfg;
  cfg.gate = true;
  // Consistent: accepted.
  UpdateInfo ok;
  update({x0, p0}, ev, cfg, &ok);
  EXPECT_FALSE(ok.rejected);
  // Rope says 1 m shorter: far outside the gate.
  FilterState far = x0;
  far.l = 8.0;
  UpdateInfo bad;
  const Belief b = update({far, p0}, ev, cfg, &bad);
  EXPECT_TRUE(bad.rejected);
  EXPECT_EQ(b.x.l, far.l);
}

TEST(Ukf, DegenerateRope) {
  FilterState x(2);
  MeasurementEvent ev;
  ev.kind = RopeMeas{x.p};
  ev.noise = MatX::Constant(1, 1, 1e-4);
  try {
    update({x, MatX::Identity(19, 19)}, ev);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRopeGeometry);
  }
}

TEST(Ukf, SingularInnovation) {
  FilterState x(2);
  x.p = Vec3(0, 0, -5);
  MeasurementEvent ev;
  ev.kind = RotationMeas{x.R};
  ev.noise = MatX::Zero(3, 3);
  try {
    update({x, MatX::Zero(19, 19)}, ev);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInnovationCovariance);
  }
}

TEST(Ukf, RotationUpdatePullsTowardReference) {
  FilterState x(2);
  MatX p = MatX::Identity(19, 19) * 0.01;
  MeasurementEvent ev;
  const Vec3 phi(0.05, -0.02, 0.03);
  ev.kind = RotationMeas{exp_so3(phi)};
  ev.noise = Mat3::Identity() * 0.01;
  const Belief b = update({x, p}, ev);
  // Equal prior and measurement weight: halfway on the group.
  EXPECT_LT((log_so3(b.x.R) - 0.5 * phi).norm(), 1e-4);
  EXPECT_NEAR(b.P(0, 0), 0.005, 1e-6);
}

TEST(Ukf, PropagateNonPositiveDt) {
  FilterState x(2);
  try {
    propagate({x, MatX::Identity(19, 19)}, {}, 0.0, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDt);
  }
}

TEST(Ukf, PropagateFreeFallAndHover) {
  FilterState x(2);
  x.v = Vec3(1, 2, 0);
  const Belief b0{x, MatX::Identity(19, 19) * 1e-6};
  ImuSample hover;
  hover.a = kGravityVec;  // level, specific force cancels gravity
  const Belief b = propagate(b0, hover, 0.5, {});
  EXPECT_LT((b.x.p - Vec3(0.5, 1.0, 0.0)).norm(), 1e-9);
  const Belief f = propagate(b0, ImuSample{}, 0.5, {});
  EXPECT_NEAR(f.x.p.z(), -0.5 * kGravity * 0.25, 1e-9);
  EXPECT_NEAR(f.x.v.z(), -kGravity * 0.5, 1e-9);
  // Covariance grows by at least the injected noise.
  EXPECT_GT(b.P(idx::V, idx::V), b0.P(idx::V, idx::V));
}

TEST(Ukf, IntegrateConstantRate) {
  FilterState x(2);
  const Vec3 w(0.0, 0.0, 0.4);
  const FilterState y = integrate(x, w, kGravityVec, 2.0, 0.02);
  EXPECT_LT((log_so3(y.R) - 0.8 * Vec3::UnitZ()).norm(), 1e-9);
}

TEST(Ukf, CovarianceStaysPsd) {
  std::mt19937_64 rng(63);
  std::normal_distribution<double> g(0.0, 1.0);
  FilterState x(2);
  x.p = Vec3(0.3, -0.2, -7.0);
  x.l = 7.0;
  x.t_f = {Vec3(0.3, 0, 0.05), Vec3(-0.3, 0, 0.05)};
  Belief b{x, MatX::Identity(19, 19) * 0.01};
  NoiseConfig q;
  MarkerMeas mm;
  mm.r_cg = Rotation3::from_matrix(Vec3(1, -1, -1).asDiagonal().toDenseMatrix());
  mm.p_gb = Vec3::Zero();
  for (int k = 0; k < 10000; ++k) {
    ImuSample u;
    u.w = 0.1 * Vec3(g(rng), g(rng), g(rng));
    u.a = kGravityVec + 0.2 * Vec3(g(rng), g(rng), g(rng));
    b = propagate(b, u, 0.005, q);
    MeasurementEvent ev;
    switch (k % 3) {
      case 0:
        ev.kind = RotationMeas{b.x.R * exp_so3(0.003 * Vec3(g(rng), g(rng), g(rng)))};
        ev.noise = Mat3::Identity() * 1e-5;
        break;
      case 1:
        ev.kind = RopeMeas{Vec3::Zero()};
        ev.noise = MatX::Constant(1, 1, 1e-4);
        break;
      default:
        mm.marker = static_cast<std::size_t>(k % 2);
        mm.y = predict_marker(b.x, mm) + 0.001 * Vec3(g(rng), g(rng), g(rng));
        ev.kind = mm;
        ev.noise = Mat3::Identity() * 1e-6;
    }
    b = update(b, ev);
    ASSERT_LT((b.P - b.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    if (k % 100 == 0) {
      ASSERT_GE(min_eig(b.P), -1e-9) << "cycle " << k;
    }
  }
}

TEST(Run, StreamsAndStride) {
  std::vector<ImuSample> imu;
  for (int k = 0; k <= 100; ++k) {
    ImuSample s;
    s.t = 1.0 + 0.01 * k;
    s.a = kGravityVec;
    imu.push_back(s);
  }
  FilterState x(2);
  x.p = Vec3(0, 0, -7);
  x.l = 7;
  std::vector<MeasurementEvent> meas;
  MeasurementEvent early;
  early.t = 0.5;  // before the first IMU sample: ignored
  early.kind = RopeMeas{Vec3::Zero()};
  early.noise = MatX::Constant(1, 1, 1e-4);
  meas.push_back(early);
  MeasurementEvent on_pivot = early;
  on_pivot.t = 1.5;
  on_pivot.kind = RopeMeas{x.p};  // degenerate: skipped, counted
  meas.push_back(on_pivot);
  FilterConfig cfg;
  cfg.record_stride = 10;
  FilterStats st;
  const auto traj = run_filter(imu, meas, {x, MatX::Identity(19, 19) * 1e-4}, cfg, &st);
  EXPECT_EQ(traj.size(), 11u);
  EXPECT_DOUBLE_EQ(traj.front().t, 1.0);
  EXPECT_DOUBLE_EQ(traj.back().t, 2.0);
  EXPECT_EQ(st.updates, 0u);
  EXPECT_EQ(st.failed, 1u);

  auto bad = imu;
  std::swap(bad[3], bad[4]);
  try {
    run_filter(bad, {}, {x, MatX::Identity(19, 19)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsortedStream);
  }
}

TEST(Run, PredictRope) {
  FilterState x(2);
  x.p = Vec3(3, 4, 0);
  x.l = 4.0;
  EXPECT_NEAR(predict_rope(x, Vec3::Zero()), 1.0, 1e-12);
}
