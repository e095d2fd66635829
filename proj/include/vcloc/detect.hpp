#pragma once

#include <Eigen/Core>
#include <array>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "vcloc/conic.hpp"
#include "vcloc/fit.hpp"
#include "vcloc/image.hpp"

namespace vcloc {

/// Directed line segment. `normal` is the left-hand normal of p0 -> p1 and
/// points toward the darker side of the edge that produced it.
struct LineSegment {
  Vec2 p0 = Vec2::Zero();
  Vec2 p1 = Vec2::Zero();
  Vec2 dir = Vec2::UnitX();
  Vec2 normal = Vec2::UnitY();
  double straightness = 0.0;

  /// dir/normal derived from the endpoints; p0 != p1 required.
  static LineSegment from_endpoints(const Vec2& p0, const Vec2& p1, double straightness);
  /// Same segment traversed backwards (normal flips with it).
  LineSegment reversed() const;

  double length() const { return (p1 - p0).norm(); }
  Vec2 midpoint() const { return 0.5 * (p0 + p1); }
};

/// Straightness of a segment known only by its endpoints: PCA ratio of a
/// rectangle of the given length and the model edge-band width.
double endpoint_straightness(double length, double band_width = 2.0);

/// Chain of segments with consistent turning. Arcs are stored with
/// left-turning orientation so that every normal faces the concave side;
/// `polarity` records whether that side was the darker one (+1) or the
/// brighter one (-1) in the source.
struct Arc {
  std::vector<LineSegment> segments;
  double span_deg = 0.0;
  Vec2 est_center = Vec2::Zero();
  bool closed = false;
  int polarity = 1;
  std::size_t index = 0;  ///< creation order, used for deterministic tie-breaks

  const Vec2& start() const { return segments.front().p0; }
  const Vec2& end() const { return segments.back().p1; }
  /// Polyline vertices: p0 of the first segment, joints (averaged), p1 of the last.
  std::vector<Vec2> vertices() const;
};

struct ArcGroup {
  std::vector<std::size_t> arcs;  ///< indices into the arc list
  ScatterAccumulator acc;
  double total_span_deg = 0.0;
};

struct DetectedEllipse {
  EllipseParams params;
  Conic conic;
  double inlier_ratio = 0.0;
  double coverage_deg = 0.0;
  int polarity = 1;
};

struct PixelRect {
  int x = 0, y = 0, width = 0, height = 0;
};

struct RoiProposal {
  PixelRect rect;
  double score = 0.0;
};

struct DetectConfig {
  double straight_ratio = 50.0;    ///< prune segments at or above this PCA ratio
  double r_link = 5.0;             ///< px
  double theta_link_deg = 30.0;
  double fit_span_deg = 90.0;
  double salient_span_deg = 135.0;
  double prune_dist = 0.01;        ///< mean |algebraic distance|, patch-normalized conic
  double group_inlier_ratio = 0.8; ///< fast validation on the group's own samples
  double inlier_dist = 1.0;        ///< px
  double normal_tol_deg = 22.5;
  int bins = 360;
  double tau_deg = 120.0;
  double min_ratio = 0.5;
  std::array<double, 4> win4{2.0, 2.0, 2.0, 2.0};
  double win_theta_deg = 5.0;
  double min_semi_minor = 3.0;     ///< px; smaller fits are discarded
};

/// Raster segment extractor settings.
struct ExtractConfig {
  double grad_threshold = 0.05;   ///< on the 1/8-normalized Sobel magnitude
  double angle_tol_deg = 10.0;
  int min_pixels = 6;
};

// --- ROI proposal --------------------------------------------------------

/// Normalized-square-difference score map for one pyramid level:
/// score(x,y) = sum (T - I)^2 / sqrt(sum T^2 * sum I^2), anchors at the
/// template's top-left corner. Size (H-h+1) x (W-w+1), row-major.
Eigen::MatrixXd nsqdiff_map(const Image& image, const Image& templ);

/// Multi-level template matching. Level maps are combined with equal weights
/// at level-0 anchors, then non-maximum suppression (radius max(w,h)/2,
/// ties in row-major order) returns the k best minima.
/// Throws TemplateLargerThanImage.
std::vector<RoiProposal> template_match(const Image& image, const Image& templ,
                                        int pyramid_levels = 2, int k_best = 3);

// --- segments and arcs ----------------------------------------------------

/// lambda1 / lambda2 of the 2x2 point covariance; +infinity when lambda2 ~ 0.
/// Throws TooFewPoints for fewer than 3 points.
double straightness_ratio(std::span<const Vec2> points);

/// Gradient / level-line region growing substitute for a full LSD.
std::vector<LineSegment> extract_segments(const Image& image, const ExtractConfig& cfg = {});

/// Links segments head-to-tail into arcs. Each segment is used once; chains are
/// split where the turning sign flips, and right-turning chains are reversed
/// (polarity -1). Spans are not filled in (see estimate_span).
std::vector<Arc> link_arcs(std::span<const LineSegment> segments, double r_link,
                           double theta_link_deg);

struct SpanEstimate {
  double span_deg = 0.0;
  Vec2 center = Vec2::Zero();
};

/// Center from the pole/midpoint construction on start, middle and end
/// points; falls back to their circumcircle when the construction is
/// parallel. Throws DegenerateTangents when both fail.
SpanEstimate estimate_span(const Arc& arc);
/// Angle swept by the arc's vertices around `center`, in degrees (<= 360).
double span_about(const Arc& arc, const Vec2& center);

/// Mutual region (convexity) constraint between two arcs.
bool region_compatible(const Arc& a, const Arc& b);

// --- validation and clustering ---------------------------------------------

/// Boundary evidence: a point with the unit normal of the edge it came from
/// and the length of boundary it stands for.
struct SupportPoint {
  Vec2 p;
  Vec2 normal;
  double weight = 1.0;  ///< px
};

/// Samples every segment at about unit spacing: round(length) samples (at
/// least one) at the centers of equal sub-intervals, each weighted by its
/// sub-interval length, so the weights sum to the segment length.
std::vector<SupportPoint> support_from_segments(std::span<const LineSegment> segments);

/// Longest run of nonzero bins with circular wrap-around (all nonzero -> size).
int longest_circular_run(std::span<const int> bins);

/// Computes inlier_ratio and coverage_deg for `e`. The expected edge normal is
/// the inward ellipse normal times `polarity`.
DetectedEllipse measure(const EllipseParams& e, std::span<const SupportPoint> support,
                        const DetectConfig& cfg, int polarity = 1);
bool accepted(const DetectedEllipse& d, const DetectConfig& cfg);
/// measure() followed by the acceptance test; empty optional on rejection.
std::optional<DetectedEllipse> validate(const EllipseParams& e,
                                        std::span<const SupportPoint> support,
                                        const DetectConfig& cfg, int polarity = 1);

/// 4D mean shift on (cx, cy, a, b) followed by 1D mean shift on theta (period pi).
/// One representative per final mode: the member with the highest inlier_ratio.
std::vector<DetectedEllipse> cluster(std::span<const DetectedEllipse> dets,
                                     const std::array<double, 4>& win4, double win_theta);

/// True when two detections fall inside each other's clustering windows.
bool within_windows(const DetectedEllipse& x, const DetectedEllipse& y,
                    const std::array<double, 4>& win4, double win_theta);

// --- pipeline ---------------------------------------------------------------

/// Intermediate products, exposed for diagnostics and tests.
struct DetectTrace {
  std::vector<Arc> arcs;
  std::vector<ArcGroup> groups;
  std::vector<DetectedEllipse> candidates;
  std::vector<std::size_t> pruned_arcs;  ///< arcs absorbed by on-the-fly pruning
};

std::vector<DetectedEllipse> detect_ellipses(std::span<const LineSegment> segments,
                                             const DetectConfig& cfg = {},
                                             DetectTrace* trace = nullptr);

/// Raster convenience: extract_segments + detect_ellipses.
std::vector<DetectedEllipse> detect_ellipses(const Image& image, const DetectConfig& cfg = {},
                                             const ExtractConfig& ecfg = {});

}  // namespace vcloc
