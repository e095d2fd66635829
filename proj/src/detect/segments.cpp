#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>

#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"

namespace vcloc {

LineSegment LineSegment::from_endpoints(const Vec2& p0, const Vec2& p1, double straightness) {
  LineSegment s;
  s.p0 = p0;
  s.p1 = p1;
  s.dir = (p1 - p0).normalized();
  s.normal = Vec2(-s.dir.y(), s.dir.x());
  s.straightness = straightness;
  return s;
}

LineSegment LineSegment::reversed() const {
  LineSegment s = *this;
  std::swap(s.p0, s.p1);
  s.dir = -dir;
  s.normal = -normal;
  return s;
}

double endpoint_straightness(double length, double band_width) {
  if (band_width <= 0.0) return std::numeric_limits<double>::infinity();
  // Uniform rectangle L x w: variances L^2/12 and w^2/12.
  return (length * length) / (band_width * band_width);
}

namespace {

// lambda1 / lambda2 of a symmetric 2x2 covariance.
double eigen_ratio(double sxx, double sxy, double syy) {
  const double mean = 0.5 * (sxx + syy);
  const double half_diff = std::hypot(0.5 * (sxx - syy), sxy);
  const double l1 = mean + half_diff;
  const double l2 = mean - half_diff;
  if (l2 <= 1e-12 * std::max(1.0, l1)) return std::numeric_limits<double>::infinity();
  return l1 / l2;
}

}  // namespace

double straightness_ratio(std::span<const Vec2> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::TooFewPoints, "straightness needs at least 3 points");
  }
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const Vec2 d = p - mean;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
  }
  if (sxx + syy == 0.0) {
    throw Error(ErrorCode::TooFewPoints, "all points coincide");
  }
  const double n = static_cast<double>(points.size());
  return eigen_ratio(sxx / n, sxy / n, syy / n);
}

std::vector<LineSegment> extract_segments(const Image& image, const ExtractConfig& cfg) {
  std::vector<LineSegment> out;
  if (image.empty() || image.width() < 3 || image.height() < 3) return out;
  const int w = image.width(), h = image.height();
  const std::size_t npix = static_cast<std::size_t>(w) * h;

  // Sobel gradient, scaled by 1/8 so a unit step has magnitude ~0.5.
  std::vector<double> gx(npix, 0.0), gy(npix, 0.0), mag(npix, 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double a = image(x - 1, y - 1), b = image(x, y - 1), c = image(x + 1, y - 1);
      const double d = image(x - 1, y), f = image(x + 1, y);
      const double g = image(x - 1, y + 1), hh = image(x, y + 1), i = image(x + 1, y + 1);
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      gx[k] = ((c + 2 * f + i) - (a + 2 * d + g)) / 8.0;
      gy[k] = ((g + 2 * hh + i) - (a + 2 * b + c)) / 8.0;
      mag[k] = std::hypot(gx[k], gy[k]);
    }
  }

  std::vector<std::size_t> seeds;
  for (std::size_t k = 0; k < npix; ++k) {
    if (mag[k] > cfg.grad_threshold) seeds.push_back(k);
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });

  const double cos_tol = std::cos(cfg.angle_tol_deg * std::numbers::pi / 180.0);
  std::vector<unsigned char> used(npix, 0);
  std::vector<std::size_t> region;
  std::deque<std::size_t> frontier;

  for (std::size_t seed : seeds) {
    if (used[seed]) continue;
    region.clear();
    frontier.clear();
    used[seed] = 1;
    region.push_back(seed);
    frontier.push_back(seed);
    Vec2 sum(gx[seed] / mag[seed], gy[seed] / mag[seed]);

    while (!frontier.empty()) {
      const std::size_t k = frontier.front();
      frontier.pop_front();
      const int x = static_cast<int>(k % w), y = static_cast<int>(k / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t nk = static_cast<std::size_t>(ny) * w + nx;
          if (used[nk] || mag[nk] <= cfg.grad_threshold) continue;
          const Vec2 u(gx[nk] / mag[nk], gy[nk] / mag[nk]);
          if (u.dot(sum.normalized()) < cos_tol) continue;
          used[nk] = 1;
          region.push_back(nk);
          frontier.push_back(nk);
          sum += u;
        }
      }
    }
    if (static_cast<int>(region.size()) < cfg.min_pixels) continue;

    // Magnitude-weighted PCA of the region.
    double wsum = 0.0;
    Vec2 c = Vec2::Zero();
    for (std::size_t k : region) {
      c += mag[k] * Vec2(static_cast<double>(k % w), static_cast<double>(k / w));
      wsum += mag[k];
    }
    c /= wsum;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k : region) {
      const Vec2 d = Vec2(static_cast<double>(k % w), static_cast<double>(k / w)) - c;
      sxx += mag[k] * d.x() * d.x();
      sxy += mag[k] * d.x() * d.y();
      syy += mag[k] * d.y() * d.y();
    }
    sxx /= wsum;
    sxy /= wsum;
    syy /= wsum;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(
        (Eigen::Matrix2d() << sxx, sxy, sxy, syy).finished());
    Vec2 axis = es.eigenvectors().col(1);

    // The normal faces the darker side, i.e. against the mean gradient.
    const Vec2 n = -sum.normalized();
    const Vec2 want_dir(n.y(), -n.x());
    if (axis.dot(want_dir) < 0.0) axis = -axis;

    double tmin = std::numeric_limits<double>::infinity();
    double tmax = -tmin;
    for (std::size_t k : region) {
      const double t =
          (Vec2(static_cast<double>(k % w), static_cast<double>(k / w)) - c).dot(axis);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    if (tmax - tmin < 1.0) continue;
    out.push_back(LineSegment::from_endpoints(c + tmin * axis, c + tmax * axis,
                                              eigen_ratio(sxx, sxy, syy)));
  }
  return out;
}

}  // namespace vcloc
