#include <algorithm>
#include <cmath>
#include <numbers>

#include "vcloc/detect.hpp"

namespace vcloc {

using std::numbers::pi;

std::vector<SupportPoint> support_from_segments(std::span<const LineSegment> segments) {
  std::vector<SupportPoint> out;
  for (const auto& s : segments) {
    const double len = s.length();
    const int steps = std::max(1, static_cast<int>(std::lround(len)));
    for (int k = 0; k < steps; ++k) {
      const double t = (k + 0.5) / steps;
      out.push_back({s.p0 + t * (s.p1 - s.p0), s.normal, len / steps});
    }
  }
  return out;
}

int longest_circular_run(std::span<const int> bins) {
  const int n = static_cast<int>(bins.size());
  if (n == 0) return 0;
  int best = 0, run = 0;
  // Two passes over the ring catch runs that wrap past the last bin.
  for (int k = 0; k < 2 * n; ++k) {
    if (bins[k % n] != 0) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return std::min(best, n);
}

DetectedEllipse measure(const EllipseParams& e, std::span<const SupportPoint> support,
                        const DetectConfig& cfg, int polarity) {
  DetectedEllipse d;
  d.params = e;
  d.conic = conic_from_params(e);
  d.polarity = polarity;

  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double cos_tol = std::cos(cfg.normal_tol_deg * pi / 180.0);
  const int nbins = std::max(1, cfg.bins);
  const double bin_width = 2.0 * pi / nbins;
  std::vector<int> hist(static_cast<std::size_t>(nbins), 0);

  double inliers = 0.0;
  for (const auto& sp : support) {
    if (rosin_distance(e, sp.p) >= cfg.inlier_dist) continue;
    const double dx = sp.p.x() - e.cx, dy = sp.p.y() - e.cy;
    const double xp = c * dx + s * dy, yp = -s * dx + c * dy;
    const Vec2 expected = -static_cast<double>(polarity) * level_set_normal(e, sp.p);
    if (sp.normal.dot(expected) < cos_tol) continue;
    inliers += sp.weight;

    // Each sample covers `weight` px of boundary.
    const double r = std::hypot(xp, yp);
    const double phi = std::atan2(yp, xp);
    const double half = r > 0.5 * sp.weight ? 0.5 * sp.weight / r : pi;
    const int lo = static_cast<int>(std::floor((phi - half) / bin_width));
    const int hi = static_cast<int>(std::floor((phi + half) / bin_width));
    for (int b = lo; b <= hi && b - lo < nbins; ++b) {
      hist[static_cast<std::size_t>(((b % nbins) + nbins) % nbins)] += 1;
    }
  }
  d.inlier_ratio = inliers / perimeter(e);
  d.coverage_deg = 360.0 * longest_circular_run(hist) / nbins;
  return d;
}

bool accepted(const DetectedEllipse& d, const DetectConfig& cfg) {
  return d.coverage_deg >= cfg.tau_deg && d.inlier_ratio >= cfg.min_ratio;
}

std::optional<DetectedEllipse> validate(const EllipseParams& e,
                                        std::span<const SupportPoint> support,
                                        const DetectConfig& cfg, int polarity) {
  DetectedEllipse d = measure(e, support, cfg, polarity);
  if (!accepted(d, cfg)) return std::nullopt;
  return d;
}

}  // namespace vcloc
