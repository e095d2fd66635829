#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"

namespace vcloc {

namespace {

using std::numbers::pi;

std::vector<Vec2> arc_points(const Arc& arc) {
  std::vector<Vec2> pts;
  pts.reserve(3 * arc.segments.size());
  for (const auto& s : arc.segments) {
    pts.push_back(s.p0);
    pts.push_back(s.midpoint());
    pts.push_back(s.p1);
  }
  return pts;
}

class GroupingContext {
 public:
  GroupingContext(std::span<const LineSegment> segments, const DetectConfig& cfg,
                  DetectTrace* trace)
      : cfg_(cfg), trace_(trace) {
    Vec2 lo = segments.front().p0, hi = lo;
    for (const auto& s : segments) {
      lo = lo.cwiseMin(s.p0).cwiseMin(s.p1);
      hi = hi.cwiseMax(s.p0).cwiseMax(s.p1);
    }
    norm_ = FitNormalization::for_patch(0.5 * (lo + hi), std::max(1.0, 0.5 * (hi - lo).norm()));
    support_ = support_from_segments(segments);

    std::vector<LineSegment> curved;
    for (const auto& s : segments) {
      if (s.straightness < cfg.straight_ratio) curved.push_back(s);
    }
    arcs_ = link_arcs(curved, cfg.r_link, cfg.theta_link_deg);
    for (auto& arc : arcs_) {
      try {
        const SpanEstimate est = estimate_span(arc);
        arc.span_deg = est.span_deg;
        arc.est_center = est.center;
      } catch (const Error&) {
        arc.span_deg = 0.0;
        arc.est_center = arc.segments[arc.segments.size() / 2].midpoint();
      }
      points_.push_back(arc_points(arc));
      accs_.push_back(accumulate(ScatterAccumulator(norm_), points_.back()));
      own_support_.push_back(support_from_segments(arc.segments));
    }
    consumed_.assign(arcs_.size(), false);
  }

  std::vector<DetectedEllipse> run() {
    std::vector<std::size_t> order(arcs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return arcs_[a].span_deg > arcs_[b].span_deg;
    });

    std::vector<DetectedEllipse> candidates;
    for (std::size_t seed : order) {
      if (consumed_[seed]) continue;
      if (auto cand = grow(seed, order)) candidates.push_back(*cand);
    }
    if (trace_) {
      trace_->arcs = arcs_;
      trace_->candidates = candidates;
    }
    return candidates;
  }

 private:
  // Fit + fast validation against the group's own boundary samples.
  std::optional<EllipseParams> fit_and_check(const ScatterAccumulator& acc,
                                             const std::vector<std::size_t>& group) const {
    EllipseParams e;
    try {
      e = params_from_conic(fit_direct(acc));
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!std::isfinite(e.a) || !std::isfinite(e.b) || e.b < cfg_.min_semi_minor) {
      return std::nullopt;
    }
    const double cos_tol = std::cos(cfg_.normal_tol_deg * pi / 180.0);
    double total = 0.0, good = 0.0;
    for (std::size_t g : group) {
      for (const auto& sp : own_support_[g]) {
        total += sp.weight;
        if (rosin_distance(e, sp.p) >= cfg_.inlier_dist) continue;
        // Normalized arcs keep their normals on the concave (inner) side.
        if (sp.normal.dot(-level_set_normal(e, sp.p)) >= cos_tol) good += sp.weight;
      }
    }
    if (total <= 0.0 || good < cfg_.group_inlier_ratio * total) {
      return std::nullopt;
    }
    return e;
  }

  bool compatible_with_group(std::size_t j, const std::vector<std::size_t>& group) const {
    return std::all_of(group.begin(), group.end(),
                       [&](std::size_t g) { return region_compatible(arcs_[j], arcs_[g]); });
  }

  double mean_abs_algebraic(const Conic& normalized_conic, std::size_t j) const {
    double sum = 0.0;
    for (const auto& p : points_[j]) sum += std::abs(normalized_conic.evaluate(norm_.apply(p)));
    return sum / static_cast<double>(points_[j].size());
  }

  std::optional<DetectedEllipse> grow(std::size_t seed, const std::vector<std::size_t>& order) {
    ArcGroup group;
    group.arcs = {seed};
    group.acc = accs_[seed];
    group.total_span_deg = arcs_[seed].span_deg;
    std::optional<EllipseParams> fitted;
    if (group.total_span_deg >= cfg_.fit_span_deg) fitted = fit_and_check(group.acc, group.arcs);

    const int polarity = arcs_[seed].polarity;
    for (std::size_t j : order) {
      if (j == seed || consumed_[j] || arcs_[j].polarity != polarity) continue;
      if (!compatible_with_group(j, group.arcs)) continue;
      ScatterAccumulator acc = merge(group.acc, accs_[j]);
      const double total = group.total_span_deg + arcs_[j].span_deg;
      std::vector<std::size_t> members = group.arcs;
      members.push_back(j);
      if (total >= cfg_.fit_span_deg) {
        auto e = fit_and_check(acc, members);
        if (!e) continue;  // this arc spoils the fit: leave it out
        fitted = e;
      }
      group.arcs = std::move(members);
      group.acc = acc;
      group.total_span_deg = total;
    }
    if (!fitted) return std::nullopt;

    // Salience uses spans re-measured about the fitted center.
    const Vec2 center(fitted->cx, fitted->cy);
    double recomputed = 0.0;
    for (std::size_t g : group.arcs) recomputed += span_about(arcs_[g], center);
    recomputed = std::min(360.0, recomputed);
    if (recomputed >= cfg_.salient_span_deg) {
      const Eigen::Matrix3d ninv = norm_.matrix().inverse();
      const Conic cn =
          Conic::from_matrix(ninv.transpose() * conic_from_params(*fitted).matrix() * ninv)
              .normalized();
      bool added = false;
      for (std::size_t j : order) {
        if (consumed_[j] || arcs_[j].polarity != polarity ||
            std::find(group.arcs.begin(), group.arcs.end(), j) != group.arcs.end()) {
          continue;
        }
        if (mean_abs_algebraic(cn, j) < cfg_.prune_dist) {
          group.arcs.push_back(j);
          group.acc.merge(accs_[j]);
          added = true;
          if (trace_) trace_->pruned_arcs.push_back(j);
        }
      }
      if (added) {
        if (auto refit = fit_and_check(group.acc, group.arcs)) fitted = refit;
      }
      for (std::size_t g : group.arcs) consumed_[g] = true;
    }
    if (trace_) trace_->groups.push_back(group);
    return measure(*fitted, support_, cfg_, polarity);
  }

  const DetectConfig& cfg_;
  DetectTrace* trace_;
  FitNormalization norm_;
  std::vector<SupportPoint> support_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<Vec2>> points_;
  std::vector<ScatterAccumulator> accs_;
  std::vector<std::vector<SupportPoint>> own_support_;
  std::vector<bool> consumed_;
};

}  // namespace

std::vector<DetectedEllipse> detect_ellipses(std::span<const LineSegment> segments,
                                             const DetectConfig& cfg, DetectTrace* trace) {
  if (segments.empty()) return {};
  GroupingContext ctx(segments, cfg, trace);
  const std::vector<DetectedEllipse> candidates = ctx.run();
  const double win_theta = cfg.win_theta_deg * pi / 180.0;
  std::vector<DetectedEllipse> clustered = cluster(candidates, cfg.win4, win_theta);

  std::vector<DetectedEllipse> kept;
  for (const auto& d : clustered) {
    if (accepted(d, cfg)) kept.push_back(d);
  }
  // Strongest first; anything inside the windows of a kept detection is a duplicate.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
    return x.inlier_ratio > y.inlier_ratio;
  });
  std::vector<DetectedEllipse> out;
  for (const auto& d : kept) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const DetectedEllipse& o) {
      return within_windows(o, d, cfg.win4, win_theta);
    });
    if (!dup) out.push_back(d);
  }
  return out;
}

std::vector<DetectedEllipse> detect_ellipses(const Image& image, const DetectConfig& cfg,
                                             const ExtractConfig& ecfg) {
  const auto segments = extract_segments(image, ecfg);
  return detect_ellipses(segments, cfg);
}

}  // namespace vcloc
