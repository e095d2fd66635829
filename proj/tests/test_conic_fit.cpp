#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "vcloc/conic.hpp"
#include "vcloc/error.hpp"
#include "vcloc/fit.hpp"

using namespace vcloc;

namespace {

EllipseParams random_ellipse(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-200.0, 200.0), ax(5.0, 150.0), th(0.0, std::numbers::pi);
  EllipseParams e;
  e.cx = c(rng);
  e.cy = c(rng);
  const double a = ax(rng), b = ax(rng);
  e.a = std::max(a, b);
  e.b = std::min(a, b);
  e.theta = th(rng);
  return e;
}

std::vector<Vec2> sample(const EllipseParams& e, int n, double t0 = 0.0, double t1 = 2 * std::numbers::pi) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(e.point_at(t0 + (t1 - t0) * i / n));
  return pts;
}

void expect_params_near(const EllipseParams& got, const EllipseParams& want, double tol) {
  EXPECT_NEAR(got.cx, want.cx, tol);
  EXPECT_NEAR(got.cy, want.cy, tol);
  EXPECT_NEAR(got.a, want.a, tol);
  EXPECT_NEAR(got.b, want.b, tol);
  if (want.a - want.b > 1e-3 * want.a) {
    EXPECT_NEAR(half_turn_difference(got.theta, want.theta), 0.0, tol);
  }
}

}  // namespace

TEST(Conic, ParamsRoundTrip) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 500; ++i) {
    const EllipseParams e = random_ellipse(rng);
    const Conic c = conic_from_params(e);
    ASSERT_TRUE(c.is_ellipse());
    const EllipseParams back = params_from_conic(c);
    EXPECT_TRUE(back.valid());
    expect_params_near(back, e, 1e-8 * (1.0 + e.a));
    for (const auto& p : sample(e, 7)) EXPECT_NEAR(c.normalized().evaluate(p), 0.0, 1e-9);
  }
}

TEST(Conic, NormalizationCanonical) {
  const Conic c = conic_from_params({10, -5, 30, 20, 0.4});
  const Conic n = c.normalized();
  EXPECT_NEAR(n.matrix().norm(), 1.0, 1e-12);
  EXPECT_LE(n.F(), 0.0);
  const Conic neg(-3 * c.A(), -3 * c.B(), -3 * c.C(), -3 * c.D(), -3 * c.E(), -3 * c.F());
  EXPECT_LT((neg.normalized().coeffs() - n.coeffs()).norm(), 1e-12);
  EXPECT_LT(conic_distance(c, neg), 1e-12);
}

TEST(Conic, NotAnEllipse) {
  const Conic hyperbola(1, 0, -1, 0, 0, -1);
  try {
    params_from_conic(hyperbola);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAnEllipse);
  }
  // Imaginary ellipse x^2 + y^2 + 1 = 0.
  EXPECT_THROW(params_from_conic(Conic(1, 0, 1, 0, 0, 1)), Error);
}

TEST(Conic, TransformRoundTrip) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Conic c = conic_from_params(random_ellipse(rng));
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    h.topLeftCorner<2, 2>() += 0.3 * Eigen::Matrix2d::NullaryExpr([&](Eigen::Index, Eigen::Index) { return g(rng); });
    h(0, 2) = 50 * g(rng);
    h(1, 2) = 50 * g(rng);
    const Conic t = transform_conic(c, h);
    EXPECT_EQ(t.is_ellipse(), c.is_ellipse());
    EXPECT_LT(conic_distance(transform_conic(t, h.inverse()), c), 1e-9);
    // Points move with the map.
    const EllipseParams e = params_from_conic(c);
    for (const auto& p : sample(e, 5)) {
      const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
      EXPECT_NEAR(t.normalized().evaluate(q.head<2>() / q.z()), 0.0, 1e-8);
    }
  }
  Eigen::Matrix3d singular = Eigen::Matrix3d::Zero();
  singular(2, 2) = 1.0;
  EXPECT_THROW(transform_conic(conic_from_params({}), singular), Error);
}

TEST(Conic, PatchToImage) {
  const EllipseParams e{12, 9, 8, 5, 0.3};
  const EllipseParams moved = params_from_conic(patch_to_image(conic_from_params(e), 100, 40));
  EXPECT_NEAR(moved.cx, 112, 1e-9);
  EXPECT_NEAR(moved.cy, 49, 1e-9);
  EXPECT_NEAR(moved.a, 8, 1e-9);
}

TEST(Conic, PerimeterBounds) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const EllipseParams e = random_ellipse(rng);
    const double p = perimeter(e);
    EXPECT_GE(p, 2 * std::numbers::pi * e.b);
    EXPECT_LE(p, 2 * std::numbers::pi * e.a);
  }
  EXPECT_NEAR(perimeter({0, 0, 3, 3, 0}), 6 * std::numbers::pi, 1e-12);
}

TEST(Conic, RosinDistanceAgainstOrthogonal) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> off(0.0, 2.0);
  std::uniform_real_distribution<double> t(0.0, 2 * std::numbers::pi);
  for (int i = 0; i < 300; ++i) {
    EllipseParams e = random_ellipse(rng);
    e.b = std::max(e.b, 0.3 * e.a);  // moderate eccentricity
    const Vec2 p = e.point_at(t(rng)) + Vec2(off(rng), off(rng));
    const double exact = oracle::orthogonal_distance(e, p);
    // The approximation is tight near the boundary, which is where the
    // inlier test operates.
    EXPECT_NEAR(rosin_distance(e, p), exact, 0.05 * exact + 1e-6);
  }
  const EllipseParams e{0, 0, 10, 5, 0};
  EXPECT_NEAR(rosin_distance(e, {10, 0}), 0.0, 1e-9);
  EXPECT_NEAR(rosin_distance(e, {12, 0}), 2.0, 1e-9);
  EXPECT_NEAR(rosin_distance(e, {0, 7}), 2.0, 1e-9);
}

TEST(Conic, LevelSetNormal) {
  const EllipseParams e{1, 2, 10, 5, 0.5};
  for (double t = 0; t < 6; t += 0.7) {
    const Vec2 n = level_set_normal(e, e.point_at(t));
    EXPECT_LT((n - e.normal_at(t)).norm(), 1e-9);
  }
  EXPECT_EQ(level_set_normal(e, {1, 2}), Vec2::Zero());
}

TEST(Conic, WrapHalfTurn) {
  EXPECT_NEAR(wrap_half_turn(-0.1), std::numbers::pi - 0.1, 1e-15);
  EXPECT_NEAR(wrap_half_turn(std::numbers::pi + 0.2), 0.2, 1e-12);
  EXPECT_NEAR(half_turn_difference(0.05, std::numbers::pi - 0.05), 0.1, 1e-12);
}

// ---------------------------------------------------------------- fit

TEST(Fit, ExactRecoveryNoiseless) {
  std::mt19937_64 rng(20);
  for (int i = 0; i < 300; ++i) {
    const EllipseParams e = random_ellipse(rng);
    const auto pts = sample(e, 40);
    const EllipseParams got = params_from_conic(fit_points(pts));
    expect_params_near(got, e, 1e-8 * (1.0 + e.a));
  }
}

TEST(Fit, PartialArcRecovery) {
  const EllipseParams e{300, 200, 60, 35, 1.0};
  const auto pts = sample(e, 30, 0.2, 0.2 + 2.0);  // ~115 degrees
  expect_params_near(params_from_conic(fit_points(pts)), e, 1e-7);
}

TEST(Fit, IncrementalEqualsBatch) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const EllipseParams e = random_ellipse(rng);
    auto pts = sample(e, 60);
    for (auto& p : pts) p += Vec2(noise(rng), noise(rng));
    const auto norm = FitNormalization::for_patch({e.cx, e.cy}, 2 * e.a);
    const ScatterAccumulator batch = accumulate(ScatterAccumulator(norm), pts);
    std::uniform_int_distribution<std::size_t> cut(1, pts.size() - 1);
    const std::size_t k = cut(rng);
    const auto a = accumulate(ScatterAccumulator(norm), std::span(pts).first(k));
    const auto b = accumulate(ScatterAccumulator(norm), std::span(pts).subspan(k));
    const auto merged = merge(a, b);
    EXPECT_EQ(merged.n, batch.n);
    EXPECT_LT((merged.s - batch.s).norm(), 1e-12 * batch.s.norm());
    EXPECT_LT(conic_distance(fit_direct(merged), fit_direct(batch)), 1e-10);
  }
}

TEST(Fit, MergeRejectsDifferentNormalizations) {
  ScatterAccumulator a(FitNormalization::for_patch({0, 0}, 10));
  ScatterAccumulator b(FitNormalization::for_patch({1, 0}, 10));
  try {
    a.merge(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
}

TEST(Fit, TooFewPoints) {
  const auto pts = sample({0, 0, 10, 5, 0}, 5);
  try {
    fit_points(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
}

TEST(Fit, CollinearPointsRejected) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(i, 2.0 * i);
  EXPECT_THROW(fit_points(pts), Error);
}

TEST(Fit, TranslationEquivariance) {
  const EllipseParams e{40, -20, 30, 12, 2.2};
  std::mt19937_64 rng(22);
  std::normal_distribution<double> noise(0.0, 0.5);
  auto pts = sample(e, 50);
  for (auto& p : pts) p += Vec2(noise(rng), noise(rng));
  const Conic c0 = fit_points(pts);
  const Vec2 shift(123.0, -45.0);
  for (auto& p : pts) p += shift;
  const Conic c1 = fit_points(pts);
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h.topRightCorner<2, 1>() = shift;
  EXPECT_LT(conic_distance(transform_conic(c0, h), c1), 1e-8);
}

TEST(Fit, LocalOptimality) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 0.5), pert(0.0, 1e-3);
  const EllipseParams e{0, 0, 25, 14, 0.4};
  auto pts = sample(e, 80);
  for (auto& p : pts) p += Vec2(noise(rng), noise(rng));
  // Compare under the fit's own constraint, in normalized coordinates.
  const auto norm = FitNormalization::for_patch({0, 0}, 30);
  std::vector<Vec2> np;
  for (const auto& p : pts) np.push_back(norm.apply(p));
  const Conic c = fit_points(np);
  auto constrained = [](const Conic& k) {
    const double s = 4 * k.A() * k.C() - 4 * k.B() * k.B();
    const auto v = k.coeffs() / std::sqrt(s);
    return Conic(v[0], v[1], v[2], v[3], v[4], v[5]);
  };
  auto residual = [&](const Conic& k) {
    double r = 0;
    for (const auto& p : np) r += std::pow(k.evaluate(p), 2);
    return r;
  };
  const double best = residual(constrained(c));
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix<double, 6, 1> v = c.coeffs();
    for (int j = 0; j < 6; ++j) v[j] += pert(rng);
    const Conic k(v[0], v[1], v[2], v[3], v[4], v[5]);
    if (!k.is_ellipse()) continue;
    EXPECT_LE(best, residual(constrained(k)) * (1 + 1e-12));
  }
}

TEST(Fit, MonteCarloCenterError) {
  // sigma = 0.05 px boundary noise: fitted center within 0.05 px.
  std::mt19937_64 rng(24);
  std::normal_distribution<double> noise(0.0, 0.05);
  const EllipseParams e{512.3, 384.7, 80.0, 50.0, 0.6};
  for (int trial = 0; trial < 200; ++trial) {
    auto pts = sample(e, 180);
    for (auto& p : pts) p += Vec2(noise(rng), noise(rng));
    const EllipseParams got = params_from_conic(fit_points(pts));
    EXPECT_LT(std::hypot(got.cx - e.cx, got.cy - e.cy), 0.05);
  }
}
