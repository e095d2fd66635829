#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"

namespace vcloc {

namespace {

using std::numbers::pi;

// Turns smaller than this do not commit a chain to a turning direction.
constexpr double kNeutralTurnRad = 0.5 * pi / 180.0;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_turn(const Vec2& from, const Vec2& to) {
  return std::atan2(cross2(from, to), from.dot(to));
}

int turn_sign(double turn) {
  if (std::abs(turn) < kNeutralTurnRad) return 0;
  return turn > 0.0 ? 1 : -1;
}

// Splits an ordered chain wherever the turning sign flips.
std::vector<std::vector<std::size_t>> split_by_sign(const std::vector<std::size_t>& chain,
                                                    std::span<const LineSegment> segs,
                                                    std::vector<int>& signs) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur{chain.front()};
  int sign = 0;
  for (std::size_t m = 1; m < chain.size(); ++m) {
    const int s = turn_sign(signed_turn(segs[chain[m - 1]].dir, segs[chain[m]].dir));
    if (s != 0 && sign != 0 && s != sign) {
      out.push_back(std::move(cur));
      signs.push_back(sign);
      cur = {chain[m]};
      sign = 0;
      continue;
    }
    if (sign == 0) sign = s;
    cur.push_back(chain[m]);
  }
  out.push_back(std::move(cur));
  signs.push_back(sign);
  return out;
}

}  // namespace

std::vector<Vec2> Arc::vertices() const {
  std::vector<Vec2> v;
  if (segments.empty()) return v;
  v.reserve(segments.size() + 1);
  v.push_back(segments.front().p0);
  for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
    v.push_back(0.5 * (segments[k].p1 + segments[k + 1].p0));
  }
  v.push_back(segments.back().p1);
  return v;
}

std::vector<Arc> link_arcs(std::span<const LineSegment> segs, double r_link,
                           double theta_link_deg) {
  const std::size_t n = segs.size();
  const double theta_link = theta_link_deg * pi / 180.0;

  // Candidate head-to-tail links, best first: distance, |turn|, then indices.
  std::vector<std::tuple<double, double, std::size_t, std::size_t>> links;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (segs[j].p0 - segs[i].p1).norm();
      if (d > r_link) continue;
      const double turn = std::abs(signed_turn(segs[i].dir, segs[j].dir));
      if (turn > theta_link) continue;
      links.emplace_back(d, turn, i, j);
    }
  }
  std::sort(links.begin(), links.end());

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> succ(n, kNone), pred(n, kNone);
  for (const auto& [d, turn, i, j] : links) {
    if (succ[i] != kNone || pred[j] != kNone) continue;
    succ[i] = j;
    pred[j] = i;
  }

  std::vector<std::vector<std::size_t>> chains;
  std::vector<bool> cyclic;
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (pred[i] != kNone) continue;
    std::vector<std::size_t> chain;
    for (std::size_t k = i; k != kNone; k = succ[k]) {
      chain.push_back(k);
      seen[k] = true;
    }
    chains.push_back(std::move(chain));
    cyclic.push_back(false);
  }
  // Whatever is left lies on cycles; start each at its smallest index.
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::vector<std::size_t> chain;
    std::size_t k = i;
    do {
      chain.push_back(k);
      seen[k] = true;
      k = succ[k];
    } while (k != i);
    chains.push_back(std::move(chain));
    cyclic.push_back(true);
  }

  std::vector<Arc> arcs;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    std::vector<std::size_t> chain = chains[c];
    bool closed = false;
    if (cyclic[c]) {
      // A cycle stays closed only if the turn sign is consistent all the way round.
      int sign = 0;
      std::size_t first_break = kNone;
      for (std::size_t m = 0; m < chain.size(); ++m) {
        const auto& a = segs[chain[m]];
        const auto& b = segs[chain[(m + 1) % chain.size()]];
        const int s = turn_sign(signed_turn(a.dir, b.dir));
        if (s == 0) continue;
        if (sign == 0) {
          sign = s;
        } else if (s != sign) {
          first_break = (m + 1) % chain.size();
          break;
        }
      }
      if (first_break == kNone) {
        closed = true;
      } else {
        std::rotate(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(first_break),
                    chain.end());
      }
    }

    std::vector<int> signs;
    auto pieces = closed ? std::vector<std::vector<std::size_t>>{chain}
                         : split_by_sign(chain, segs, signs);
    if (closed) {
      int s = 0;
      for (std::size_t m = 0; m < chain.size() && s == 0; ++m) {
        s = turn_sign(
            signed_turn(segs[chain[m]].dir, segs[chain[(m + 1) % chain.size()]].dir));
      }
      signs.push_back(s);
    }

    for (std::size_t p = 0; p < pieces.size(); ++p) {
      Arc arc;
      arc.closed = closed;
      for (std::size_t k : pieces[p]) arc.segments.push_back(segs[k]);
      if (signs[p] < 0) {
        std::reverse(arc.segments.begin(), arc.segments.end());
        for (auto& s : arc.segments) s = s.reversed();
        arc.polarity = -1;
      }
      arc.index = arcs.size();
      arcs.push_back(std::move(arc));
    }
  }
  return arcs;
}

namespace {

struct Line {
  Vec2 point;
  Vec2 dir;
};

// Line through the chord midpoint and the pole of the chord (the tangents'
// intersection); it passes through the conic's center.
Line center_line(const Vec2& p1, const Vec2& t1, const Vec2& p2, const Vec2& t2) {
  const Vec2 mid = 0.5 * (p1 + p2);
  const double den = cross2(t1, t2);
  if (std::abs(den) < 1e-9) return {mid, t1};  // pole at infinity along the tangents
  const double alpha = cross2(p2 - p1, t2) / den;
  const Vec2 pole = p1 + alpha * t1;
  const Vec2 d = pole - mid;
  if (d.norm() < 1e-12) return {mid, Vec2::Zero()};
  return {mid, d.normalized()};
}

std::optional<Vec2> intersect(const Line& a, const Line& b) {
  const double den = cross2(a.dir, b.dir);
  if (a.dir.isZero() || b.dir.isZero() || std::abs(den) < 1e-9) return std::nullopt;
  const double s = cross2(b.point - a.point, b.dir) / den;
  return a.point + s * a.dir;
}

std::optional<Vec2> circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d = 2.0 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  if (std::abs(d) < 1e-9 * scale) return std::nullopt;
  const double a2 = a.squaredNorm(), b2 = b.squaredNorm(), c2 = c.squaredNorm();
  return Vec2((a2 * (b.y() - c.y()) + b2 * (c.y() - a.y()) + c2 * (a.y() - b.y())) / d,
              (a2 * (c.x() - b.x()) + b2 * (a.x() - c.x()) + c2 * (b.x() - a.x())) / d);
}

}  // namespace

double span_about(const Arc& arc, const Vec2& center) {
  if (arc.closed) return 360.0;
  const auto v = arc.vertices();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    total += signed_turn(v[k] - center, v[k + 1] - center);
  }
  return std::min(360.0, std::abs(total) * 180.0 / pi);
}

SpanEstimate estimate_span(const Arc& arc) {
  if (arc.segments.empty()) throw Error(ErrorCode::DegenerateTangents, "empty arc");
  const auto& segs = arc.segments;
  const std::size_t n = segs.size();
  // A chord's direction is the boundary tangent at the chord's midpoint, so
  // all three tangents are anchored there rather than at the endpoints.
  const Vec2 ps = segs.front().midpoint(), ts = segs.front().dir;
  const Vec2 pe = segs.back().midpoint(), te = segs.back().dir;
  const Vec2 pm = segs[n / 2].midpoint(), tm = segs[n / 2].dir;

  std::optional<Vec2> center =
      intersect(center_line(ps, ts, pm, tm), center_line(pm, tm, pe, te));
  if (!center) center = circumcenter(ps, pm, pe);
  if (!center) {
    throw Error(ErrorCode::DegenerateTangents, "collinear arc: center at infinity");
  }
  return {span_about(arc, *center), *center};
}

namespace {

bool one_way(const Arc& a, const Arc& b) {
  const Vec2& n1 = a.segments.front().normal;
  const Vec2& n2 = a.segments.back().normal;
  return n1.dot(b.start() - a.start()) >= 0.0 && n1.dot(b.end() - a.start()) >= 0.0 &&
         n2.dot(b.start() - a.end()) >= 0.0 && n2.dot(b.end() - a.end()) >= 0.0;
}

}  // namespace

bool region_compatible(const Arc& a, const Arc& b) {
  if (a.segments.empty() || b.segments.empty()) return false;
  return one_way(a, b) && one_way(b, a);
}

}  // namespace vcloc
