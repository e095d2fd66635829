#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"
#include "vcloc/kdtree.hpp"

using namespace vcloc;

namespace {

constexpr double kPi = std::numbers::pi;

// Chords of an ellipse boundary at increasing parametric angle, skipping the
// occluded interval [occ_from, occ_to) (radians).
std::vector<LineSegment> chords(const EllipseParams& e, int n, double occ_from = 0.0,
                                double occ_to = 0.0, double noise = 0.0, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec2> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = e.point_at(2 * kPi * i / n) + noise * Vec2(g(rng), g(rng));
  auto hidden = [&](double t) {
    double rel = std::fmod(t - occ_from + 4 * kPi, 2 * kPi);
    return rel < occ_to - occ_from;
  };
  std::vector<LineSegment> out;
  for (int i = 0; i < n; ++i) {
    const double t0 = 2 * kPi * i / n, t1 = 2 * kPi * (i + 1) / n;
    if (hidden(t0) || hidden(t1 - 1e-12)) continue;
    const Vec2 a = pts[i], b = pts[(i + 1) % n];
    out.push_back(LineSegment::from_endpoints(a, b, endpoint_straightness((b - a).norm())));
  }
  return out;
}

int chord_count(const EllipseParams& e) { return std::max(24, static_cast<int>(perimeter(e) / 8.0)); }

void expect_match(const DetectedEllipse& d, const EllipseParams& e) {
  EXPECT_NEAR(d.params.cx, e.cx, 1.0);
  EXPECT_NEAR(d.params.cy, e.cy, 1.0);
  EXPECT_NEAR(d.params.a, e.a, 1.0);
  EXPECT_NEAR(d.params.b, e.b, 1.0);
  EXPECT_NEAR(std::abs(half_turn_difference(d.params.theta, e.theta)), 0.0, kPi / 180.0);
}

const DetectedEllipse* nearest(const std::vector<DetectedEllipse>& ds, const EllipseParams& e) {
  const DetectedEllipse* best = nullptr;
  double bd = 1e300;
  for (const auto& d : ds) {
    const double dist = std::hypot(d.params.cx - e.cx, d.params.cy - e.cy);
    if (dist < bd) {
      bd = dist;
      best = &d;
    }
  }
  return best;
}

}  // namespace

TEST(Segments, FromEndpoints) {
  const auto s = LineSegment::from_endpoints({0, 0}, {3, 4}, 10.0);
  EXPECT_NEAR(s.dir.norm(), 1.0, 1e-12);
  EXPECT_NEAR(s.dir.dot(s.normal), 0.0, 1e-12);
  EXPECT_NEAR(s.dir.x() * s.normal.y() - s.dir.y() * s.normal.x(), 1.0, 1e-12);  // left-hand
  const auto r = s.reversed();
  EXPECT_EQ(r.p0, s.p1);
  EXPECT_LT((r.normal + s.normal).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(s.length(), 5.0);
}

TEST(Segments, StraightnessRatio) {
  std::vector<Vec2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_TRUE(std::isinf(straightness_ratio(line)));
  std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_NEAR(straightness_ratio(square), 1.0, 1e-12);
  std::vector<Vec2> two{{0, 0}, {1, 0}};
  try {
    straightness_ratio(two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewPoints);
  }
  EXPECT_GT(endpoint_straightness(40.0), endpoint_straightness(8.0));
}

TEST(Arcs, LinkingConstraints) {
  const EllipseParams e{100, 80, 60, 30, 0.3};
  DetectConfig cfg;
  const auto segs = chords(e, 60, 1.0, 1.6, 0.2, 5);
  const auto arcs = link_arcs(segs, cfg.r_link, cfg.theta_link_deg);
  std::size_t used = 0;
  for (const auto& arc : arcs) {
    used += arc.segments.size();
    for (std::size_t k = 1; k < arc.segments.size(); ++k) {
      const auto& a = arc.segments[k - 1];
      const auto& b = arc.segments[k];
      EXPECT_LE((b.p0 - a.p1).norm(), cfg.r_link);
      const double turn = std::atan2(a.dir.x() * b.dir.y() - a.dir.y() * b.dir.x(), a.dir.dot(b.dir));
      EXPECT_LE(std::abs(turn), cfg.theta_link_deg * kPi / 180.0 + 1e-12);
      EXPECT_GE(turn, -0.5 * kPi / 180.0);  // stored left-turning
    }
  }
  EXPECT_EQ(used, segs.size());
  // Noise-free, a single gap leaves one open arc.
  const auto clean = link_arcs(chords(e, 60, 1.0, 1.6), cfg.r_link, cfg.theta_link_deg);
  ASSERT_EQ(clean.size(), 1u);
  EXPECT_FALSE(clean[0].closed);
}

TEST(Arcs, ReversedInputHasNegativePolarity) {
  const EllipseParams e{0, 0, 40, 40, 0};
  auto segs = chords(e, 40, 0.0, 2.0);
  std::vector<LineSegment> rev;
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) rev.push_back(it->reversed());
  const auto a = link_arcs(segs, 5, 30);
  const auto b = link_arcs(rev, 5, 30);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(a[0].polarity, -b[0].polarity);
}

TEST(Arcs, SpanEstimate) {
  const EllipseParams e{50, 50, 30, 30, 0};
  const auto segs = chords(e, 72, kPi / 2, 2 * kPi);  // quarter circle remains
  const auto arcs = link_arcs(segs, 5, 30);
  ASSERT_EQ(arcs.size(), 1u);
  const SpanEstimate s = estimate_span(arcs[0]);
  EXPECT_NEAR(s.span_deg, 90.0, 1.0);
  EXPECT_LT((s.center - Vec2(50, 50)).norm(), 0.5);
  EXPECT_NEAR(span_about(arcs[0], {50, 50}), 90.0, 1e-6);
}

TEST(Arcs, RegionCompatibleSymmetric) {
  const EllipseParams e1{0, 0, 40, 25, 0.2}, e2{200, 0, 40, 25, 0.2};
  std::vector<Arc> arcs;
  for (const auto& e : {e1, e2}) {
    for (double start : {0.0, 2.0, 4.0}) {
      for (const auto& a : link_arcs(chords(e, 60, start + 1.2, start + 2 * kPi), 5, 30)) arcs.push_back(a);
    }
  }
  ASSERT_EQ(arcs.size(), 6u);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    for (std::size_t j = 0; j < arcs.size(); ++j) {
      EXPECT_EQ(region_compatible(arcs[i], arcs[j]), region_compatible(arcs[j], arcs[i]));
    }
  }
  // Arcs of one ellipse are mutually compatible.
  EXPECT_TRUE(region_compatible(arcs[0], arcs[1]));
  EXPECT_TRUE(region_compatible(arcs[1], arcs[2]));
}

TEST(Validate, LongestCircularRun) {
  std::vector<int> b{1, 1, 0, 1, 1, 1, 0, 1};
  EXPECT_EQ(longest_circular_run(b), 3);
  std::vector<int> wrap{1, 1, 0, 0, 1, 1, 1};
  EXPECT_EQ(longest_circular_run(wrap), 5);
  std::vector<int> all{2, 1, 1};
  EXPECT_EQ(longest_circular_run(all), 3);
  std::vector<int> none{0, 0};
  EXPECT_EQ(longest_circular_run(none), 0);
}

TEST(Validate, MeasureFullAndPartial) {
  const EllipseParams e{100, 100, 50, 30, 0.4};
  DetectConfig cfg;
  const auto full = support_from_segments(chords(e, 80));
  const DetectedEllipse d = measure(e, full, cfg);
  EXPECT_GT(d.inlier_ratio, 0.95);
  EXPECT_NEAR(d.coverage_deg, 360.0, 1e-9);
  EXPECT_TRUE(accepted(d, cfg));
  // Opposite polarity: the normals disagree.
  EXPECT_LT(measure(e, full, cfg, -1).inlier_ratio, 0.05);
  const auto half = support_from_segments(chords(e, 80, 0.0, kPi));
  const DetectedEllipse h = measure(e, half, cfg);
  EXPECT_NEAR(h.coverage_deg, 180.0, 6.0);
  EXPECT_NEAR(h.inlier_ratio, 0.5, 0.06);
}

TEST(Cluster, MergesDuplicates) {
  std::vector<DetectedEllipse> ds;
  for (int i = 0; i < 5; ++i) {
    DetectedEllipse d;
    d.params = {100 + 0.2 * i, 50, 30, 20, wrap_half_turn(-0.01 + 0.005 * i)};
    d.inlier_ratio = 0.5 + 0.01 * i;
    ds.push_back(d);
  }
  DetectedEllipse other;
  other.params = {200, 50, 30, 20, 0.0};
  ds.push_back(other);
  const auto out = cluster(ds, {2, 2, 2, 2}, 5.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0].inlier_ratio, 0.54, 1e-12);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      EXPECT_FALSE(within_windows(out[i], out[j], {2, 2, 2, 2}, 5.0));
    }
  }
}

TEST(KdTree, RadiusSearchMatchesBruteForce) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> pts(4 * 500);
  for (auto& v : pts) v = u(rng);
  const KdTree tree(pts, 4);
  for (int q = 0; q < 50; ++q) {
    const double query[4] = {u(rng), u(rng), u(rng), u(rng)};
    std::vector<std::size_t> brute;
    for (std::size_t i = 0; i < 500; ++i) {
      double d2 = 0;
      for (int k = 0; k < 4; ++k) d2 += std::pow(pts[4 * i + k] - query[k], 2);
      if (d2 <= 4.0) brute.push_back(i);
    }
    EXPECT_EQ(tree.radius_search(query, 2.0), brute);
  }
}

// ---------------------------------------------------------------- pipeline

TEST(Detect, SingleFullEllipse) {
  const EllipseParams e{320.5, 240.25, 80, 45, 0.7};
  const auto ds = detect_ellipses(chords(e, chord_count(e)));
  ASSERT_EQ(ds.size(), 1u);
  expect_match(ds[0], e);
  EXPECT_GT(ds[0].inlier_ratio, 0.9);
}

TEST(Detect, OccludedEllipse) {
  const EllipseParams e{200, 150, 60, 40, 2.0};
  const auto ds = detect_ellipses(chords(e, chord_count(e), 1.0, 1.0 + kPi / 3, 0.3, 7));
  ASSERT_EQ(ds.size(), 1u);
  expect_match(ds[0], e);
}

TEST(Detect, TwoEllipses) {
  const EllipseParams e1{150, 150, 50, 30, 0.2}, e2{350, 170, 40, 35, 1.3};
  auto segs = chords(e1, chord_count(e1), 0, 0, 0.3, 1);
  const auto s2 = chords(e2, chord_count(e2), 0, 0, 0.3, 2);
  segs.insert(segs.end(), s2.begin(), s2.end());
  const auto ds = detect_ellipses(segs);
  ASSERT_EQ(ds.size(), 2u);
  expect_match(*nearest(ds, e1), e1);
  expect_match(*nearest(ds, e2), e2);
}

TEST(Detect, Deterministic) {
  const EllipseParams e{100, 100, 40, 22, 0.9};
  const auto segs = chords(e, chord_count(e), 2.0, 3.0, 0.4, 3);
  const auto a = detect_ellipses(segs);
  const auto b = detect_ellipses(segs);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].conic.coeffs(), b[i].conic.coeffs());
}

TEST(Detect, FarNoiseDoesNotChangeResult) {
  const EllipseParams e{100, 100, 40, 25, 0.5};
  const auto clean = chords(e, chord_count(e), 0, 0, 0.3, 9);
  const auto base = detect_ellipses(clean);
  ASSERT_EQ(base.size(), 1u);
  auto noisy = clean;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(400, 700), ang(0, 2 * kPi), len(3, 10);
  for (int i = 0; i < 40; ++i) {
    const Vec2 p(pos(rng), pos(rng));
    const double a = ang(rng);
    const Vec2 q = p + len(rng) * Vec2(std::cos(a), std::sin(a));
    noisy.push_back(LineSegment::from_endpoints(p, q, endpoint_straightness((q - p).norm())));
  }
  const auto with_noise = detect_ellipses(noisy);
  const auto* d = nearest(with_noise, e);
  ASSERT_NE(d, nullptr);
  EXPECT_NEAR(d->params.cx, base[0].params.cx, 1e-6);
  EXPECT_NEAR(d->params.cy, base[0].params.cy, 1e-6);
  EXPECT_NEAR(d->params.a, base[0].params.a, 1e-6);
  EXPECT_NEAR(d->params.b, base[0].params.b, 1e-6);
  EXPECT_NEAR(d->params.theta, base[0].params.theta, 1e-6);
}

TEST(Detect, PruningSoundness) {
  const EllipseParams e{300, 200, 90, 50, 0.4};
  const auto segs = chords(e, chord_count(e), 0.5, 0.9, 0.2, 4);
  DetectConfig cfg;
  DetectTrace trace;
  detect_ellipses(segs, cfg, &trace);
  Vec2 lo = segs.front().p0, hi = lo;
  for (const auto& s : segs) {
    lo = lo.cwiseMin(s.p0).cwiseMin(s.p1);
    hi = hi.cwiseMax(s.p0).cwiseMax(s.p1);
  }
  const auto norm = FitNormalization::for_patch(0.5 * (lo + hi), 0.5 * (hi - lo).norm());
  const Conic truth = transform_conic(conic_from_params(e), norm.matrix()).normalized();
  for (std::size_t j : trace.pruned_arcs) {
    double sum = 0;
    int n = 0;
    for (const auto& s : trace.arcs[j].segments) {
      for (const Vec2& p : {s.p0, s.midpoint(), s.p1}) {
        sum += std::abs(truth.evaluate(norm.apply(p)));
        ++n;
      }
    }
    EXPECT_LE(sum / n, 10 * cfg.prune_dist);
  }
}

TEST(Detect, NoDuplicatesWithinWindows) {
  const EllipseParams e{250, 250, 70, 69, 0.0};
  const auto ds = detect_ellipses(chords(e, chord_count(e), 0, 0, 0.5, 11));
  DetectConfig cfg;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      EXPECT_FALSE(within_windows(ds[i], ds[j], cfg.win4, cfg.win_theta_deg));
    }
  }
}

TEST(Detect, EmptyInput) {
  EXPECT_TRUE(detect_ellipses(std::vector<LineSegment>{}).empty());
}

// ---------------------------------------------------------------- raster

namespace {

// Dark filled ellipse on a bright background, 4x4 supersampled.
Image rasterize(int w, int h, const EllipseParams& e) {
  Image img(w, h, 0.0f);
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int inside = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double px = x + (sx + 0.5) / 4.0 - e.cx, py = y + (sy + 0.5) / 4.0 - e.cy;
          const double u = c * px + s * py, v = -s * px + c * py;
          if (u * u / (e.a * e.a) + v * v / (e.b * e.b) <= 1.0) ++inside;
        }
      }
      img(x, y) = static_cast<float>(0.9 - 0.7 * inside / 16.0);
    }
  }
  return img;
}

}  // namespace

TEST(Raster, ExtractedSegmentsDetectEllipse) {
  // Pixel centers sit at integer + 0.5 in the rasterizer.
  const EllipseParams e{160.5, 120.5, 40, 30, 0.5};
  const Image img = rasterize(320, 240, e);
  const auto segs = extract_segments(img);
  ASSERT_GT(segs.size(), 10u);
  const auto ds = detect_ellipses(img);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_NEAR(ds[0].params.cx, e.cx - 0.5, 0.5);
  EXPECT_NEAR(ds[0].params.cy, e.cy - 0.5, 0.5);
  EXPECT_NEAR(ds[0].params.a, e.a, 0.5);
  EXPECT_NEAR(ds[0].params.b, e.b, 0.5);
}

TEST(Raster, FlatArcsNeedLooserStraightness) {
  // Long chords of a weakly curved boundary look straight to the PCA test.
  const EllipseParams e{160.5, 120.5, 60, 38, 0.5};
  const Image img = rasterize(320, 240, e);
  EXPECT_TRUE(detect_ellipses(img).empty());
  DetectConfig cfg;
  cfg.straight_ratio = 1000.0;
  const auto ds = detect_ellipses(img, cfg);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_NEAR(ds[0].params.a, e.a, 0.5);
  EXPECT_NEAR(ds[0].params.b, e.b, 0.5);
}

TEST(Raster, NsqdiffMatchesBruteForce) {
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(23, 17), templ(5, 4);
  for (int y = 0; y < 17; ++y)
    for (int x = 0; x < 23; ++x) img(x, y) = u(rng);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) templ(x, y) = u(rng);
  const Eigen::MatrixXd m = nsqdiff_map(img, templ);
  ASSERT_EQ(m.rows(), 14);
  ASSERT_EQ(m.cols(), 19);
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 19; ++x) {
      double num = 0, st = 0, si = 0;
      for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 5; ++i) {
          const double t = templ(i, j), v = img(x + i, y + j);
          num += (t - v) * (t - v);
          st += t * t;
          si += v * v;
        }
      }
      EXPECT_NEAR(m(y, x), num / std::sqrt(st * si), 1e-6);
    }
  }
}

TEST(Raster, TemplateMatchFindsPlantedPatch) {
  const EllipseParams e{20, 20, 12, 8, 0.3};
  const Image templ = rasterize(40, 40, e);
  Image img(200, 160, 0.9f);
  const int ox = 110, oy = 70;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) img(ox + x, oy + y) = templ(x, y);
  const auto rois = template_match(img, templ, 2, 3);
  ASSERT_FALSE(rois.empty());
  EXPECT_NEAR(rois[0].rect.x, ox, 1);
  EXPECT_NEAR(rois[0].rect.y, oy, 1);
  EXPECT_EQ(rois[0].rect.width, 40);
  for (const auto& r : rois) {
    EXPECT_GE(r.rect.x, 0);
    EXPECT_LE(r.rect.x + r.rect.width, img.width());
    EXPECT_LE(r.rect.y + r.rect.height, img.height());
  }
  try {
    template_match(templ, img);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::TemplateLargerThanImage);
  }
}
