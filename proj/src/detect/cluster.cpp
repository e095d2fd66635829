#include <algorithm>
#include <cmath>

#include "vcloc/detect.hpp"
#include "vcloc/kdtree.hpp"

namespace vcloc {

namespace {

constexpr int kMaxShiftIterations = 100;
constexpr double kShiftTol = 1e-3;  // in window-scaled units

// Orientation is meaningless (at the pixel level) for near-circles.
bool near_circle(double a, double b, const std::array<double, 4>& win4) {
  return a - b <= win4[2];
}

// Flat-kernel mean shift of every member on the half-circle; returns the
// mode label of each member (modes merged within the window).
std::vector<std::size_t> theta_modes(const std::vector<double>& thetas, double win) {
  std::vector<double> modes;
  std::vector<std::size_t> labels;
  for (double t0 : thetas) {
    double m = t0;
    for (int it = 0; it < kMaxShiftIterations; ++it) {
      double sum = 0.0;
      int cnt = 0;
      for (double t : thetas) {
        const double d = half_turn_difference(t, m);
        if (std::abs(d) <= win) {
          sum += d;
          ++cnt;
        }
      }
      if (cnt == 0) break;
      const double shift = sum / cnt;
      m = wrap_half_turn(m + shift);
      if (std::abs(shift) < kShiftTol * win) break;
    }
    std::size_t label = modes.size();
    for (std::size_t k = 0; k < modes.size(); ++k) {
      if (std::abs(half_turn_difference(modes[k], m)) <= win) {
        label = k;
        break;
      }
    }
    if (label == modes.size()) modes.push_back(m);
    labels.push_back(label);
  }
  return labels;
}

}  // namespace

bool within_windows(const DetectedEllipse& x, const DetectedEllipse& y,
                    const std::array<double, 4>& win4, double win_theta) {
  const auto& p = x.params;
  const auto& q = y.params;
  if (std::abs(p.cx - q.cx) > win4[0] || std::abs(p.cy - q.cy) > win4[1] ||
      std::abs(p.a - q.a) > win4[2] || std::abs(p.b - q.b) > win4[3]) {
    return false;
  }
  if (near_circle(p.a, p.b, win4) || near_circle(q.a, q.b, win4)) return true;
  return std::abs(half_turn_difference(p.theta, q.theta)) <= win_theta;
}

std::vector<DetectedEllipse> cluster(std::span<const DetectedEllipse> dets,
                                     const std::array<double, 4>& win4, double win_theta) {
  const std::size_t n = dets.size();
  if (n == 0) return {};

  std::vector<double> pts(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = dets[i].params;
    pts[4 * i + 0] = e.cx / win4[0];
    pts[4 * i + 1] = e.cy / win4[1];
    pts[4 * i + 2] = e.a / win4[2];
    pts[4 * i + 3] = e.b / win4[3];
  }
  const KdTree tree(pts, 4);

  std::vector<std::array<double, 4>> modes;
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 4> m{pts[4 * i], pts[4 * i + 1], pts[4 * i + 2], pts[4 * i + 3]};
    for (int it = 0; it < kMaxShiftIterations; ++it) {
      const auto nb = tree.radius_search(m.data(), 1.0);
      if (nb.empty()) break;
      std::array<double, 4> next{0, 0, 0, 0};
      for (std::size_t j : nb) {
        for (int d = 0; d < 4; ++d) next[d] += tree.point(j)[d];
      }
      double shift2 = 0.0;
      for (int d = 0; d < 4; ++d) {
        next[d] /= static_cast<double>(nb.size());
        shift2 += (next[d] - m[d]) * (next[d] - m[d]);
      }
      m = next;
      if (std::sqrt(shift2) < kShiftTol) break;
    }
    std::size_t lab = modes.size();
    for (std::size_t k = 0; k < modes.size(); ++k) {
      double d2 = 0.0;
      for (int d = 0; d < 4; ++d) d2 += (modes[k][d] - m[d]) * (modes[k][d] - m[d]);
      if (d2 <= 1.0) {
        lab = k;
        break;
      }
    }
    if (lab == modes.size()) modes.push_back(m);
    label[i] = lab;
  }

  std::vector<DetectedEllipse> out;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (label[i] == k) members.push_back(i);
    }
    double mean_ecc = 0.0;
    std::vector<double> thetas;
    for (std::size_t i : members) {
      mean_ecc += dets[i].params.a - dets[i].params.b;
      thetas.push_back(dets[i].params.theta);
    }
    mean_ecc /= static_cast<double>(members.size());
    const std::vector<std::size_t> tl = mean_ecc <= win4[2]
                                            ? std::vector<std::size_t>(members.size(), 0)
                                            : theta_modes(thetas, win_theta);
    const std::size_t nt = *std::max_element(tl.begin(), tl.end()) + 1;
    for (std::size_t t = 0; t < nt; ++t) {
      const DetectedEllipse* best = nullptr;
      for (std::size_t m = 0; m < members.size(); ++m) {
        if (tl[m] != t) continue;
        const auto& d = dets[members[m]];
        if (!best || d.inlier_ratio > best->inlier_ratio) best = &d;
      }
      if (best) out.push_back(*best);
    }
  }
  return out;
}

}  // namespace vcloc
