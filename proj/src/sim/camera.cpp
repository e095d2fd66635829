#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "internal.hpp"
#include "vcloc/sim.hpp"

namespace vcloc {

namespace {

constexpr int kSamples = 180;        // 2 degree steps
constexpr double kTargetChord = 8.0;  // px
constexpr double kBand = 2.0;         // px

bool occluded(double deg, const std::vector<std::pair<double, double>>& occlusions) {
  for (const auto& [from, to] : occlusions) {
    const double width = to - from;
    if (width >= 360.0) return true;
    if (width <= 0.0) continue;
    double rel = std::fmod(deg - from, 360.0);
    if (rel < 0.0) rel += 360.0;
    if (rel < width) return true;
  }
  return false;
}

}  // namespace

double chunk_straightness(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(pts.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return es.eigenvalues()[1] / (es.eigenvalues()[0] + kBand * kBand / 12.0);
}

std::vector<LineSegment> render_segments(const Conic& conic,
                                         const std::vector<std::pair<double, double>>& occlusions,
                                         double noise_px, Rng* rng) {
  const EllipseParams e = params_from_conic(conic);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<bool> keep(kSamples);
  std::vector<Vec2> pts(kSamples);
  for (int j = 0; j < kSamples; ++j) {
    const double deg = 2.0 * j;
    keep[j] = !occluded(deg, occlusions);
    pts[j] = e.point_at(deg * std::numbers::pi / 180.0);
    if (noise_px > 0.0 && rng) {
      // Drawn for every sample so the noise does not depend on the occlusion.
      const double nx = gauss(*rng), ny = gauss(*rng);
      pts[j] += noise_px * Vec2(nx, ny);
    }
  }
  const auto n_keep = std::count(keep.begin(), keep.end(), true);
  if (n_keep == 0) return {};

  const double step_px = perimeter(e) / kSamples;
  const int per_chunk = std::clamp(static_cast<int>(std::lround(kTargetChord / step_px)), 2, 10);

  // Runs of consecutive visible samples, as index sequences (closed loop repeats the start).
  std::vector<std::vector<int>> runs;
  if (n_keep == kSamples) {
    std::vector<int> run(kSamples + 1);
    for (int j = 0; j <= kSamples; ++j) run[j] = j % kSamples;
    runs.push_back(std::move(run));
  } else {
    int start = 0;
    while (keep[start] || !keep[(start + 1) % kSamples]) start = (start + 1) % kSamples;
    start = (start + 1) % kSamples;  // first visible sample after a gap
    std::vector<int> run;
    for (int k = 0; k < kSamples; ++k) {
      const int j = (start + k) % kSamples;
      if (keep[j]) {
        run.push_back(j);
      } else if (!run.empty()) {
        runs.push_back(std::move(run));
        run.clear();
      }
    }
    if (!run.empty()) runs.push_back(std::move(run));
  }

  std::vector<LineSegment> out;
  for (const auto& run : runs) {
    const int steps = static_cast<int>(run.size()) - 1;
    if (steps < 1) continue;
    int begin = 0;
    while (begin < steps) {
      int end = std::min(begin + per_chunk, steps);
      if (steps - end == 1 && end - begin >= 2) end = steps;  // no one-step tail
      std::vector<Vec2> chunk;
      for (int k = begin; k <= end; ++k) chunk.push_back(pts[run[k]]);
      const Vec2& p0 = chunk.front();
      const Vec2& p1 = chunk.back();
      if ((p1 - p0).norm() > 1e-12) {
        out.push_back(LineSegment::from_endpoints(p0, p1, chunk_straightness(chunk)));
      }
      begin = end;
    }
  }
  return out;
}

Mat3 marker_covariance(const Vec3& p_cam, double radius, double focal, double noise_px) {
  const double d = p_cam.norm();
  const double s = std::max(noise_px, 1e-3) * std::sqrt(2.0 / kSamples);
  const double rho = focal * radius / d;
  const double sig_lat = d * s / focal;
  const double sig_depth = d * s / rho;
  const Vec3 los = p_cam / d;
  // Any orthonormal completion works: the lateral block is isotropic.
  Vec3 ref = std::abs(los.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u1 = los.cross(ref).normalized();
  const Vec3 u2 = los.cross(u1);
  Mat3 u;
  u << u1, u2, los;
  const Vec3 var(sig_lat * sig_lat, sig_lat * sig_lat, sig_depth * sig_depth);
  Mat3 c = u * var.asDiagonal() * u.transpose();
  symmetrize(c);
  return c;
}

Vec3 true_marker_position(const FilterState& x, const UavState& uav, const CameraMount& cam,
                          std::size_t marker) {
  const Rotation3 r_cg = cam.r_cb * uav.r_gb.inverse();
  return r_cg * (x.p + x.R * x.t_f.at(marker) - uav.p) + cam.t_cb + x.dt_cb;
}

MatX default_initial_covariance(std::size_t markers) {
  FilterState probe(markers);
  VecX sig(probe.dim());
  sig.segment<3>(idx::R).setConstant(0.05);
  sig.segment<3>(idx::P).setConstant(0.2);
  sig.segment<3>(idx::V).setConstant(0.2);
  sig[idx::L] = 0.5;
  sig.segment<3>(idx::DT).setConstant(0.1);
  sig.tail(3 * markers).setConstant(0.05);
  return sig.cwiseAbs2().asDiagonal();
}

FilterState sample_initial_state(const FilterState& truth, const MatX& p0, Rng* rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VecX n(p0.rows());
  for (Eigen::Index i = 0; i < n.size(); ++i) n[i] = gauss(*rng);
  return oplus(truth, psd_sqrt(p0) * n);
}

}  // namespace vcloc
