#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "internal.hpp"
#include "vcloc/error.hpp"
#include "vcloc/sim.hpp"

namespace vcloc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

enum Stream : std::uint64_t { kImuStream = 1, kRotStream, kMarkerStream, kVisionStream, kOcclStream };

double load_heading(const Scenario& sc, double t) {
  if (sc.yaw_drift_amplitude_deg == 0.0) return sc.path.yaw;
  return sc.path.yaw + sc.yaw_drift_amplitude_deg * kDeg *
                           std::sin(2.0 * std::numbers::pi * t / sc.yaw_drift_period);
}

FilterState make_state(const Scenario& sc, const PendulumState& ps, const UavState& uav, double t) {
  FilterState x(sc.markers.size());
  x.R = load_attitude(ps.r, load_heading(sc, t));
  x.p = uav.p + ps.r;
  x.v = uav.v + ps.rdot;
  x.l = sc.rope_length;
  x.dt_cb = sc.camera.dt_cb_true;
  for (std::size_t i = 0; i < sc.markers.size(); ++i) x.t_f[i] = sc.markers[i].t_lf;
  return x;
}

// integral_0^1 exp(s phi^) ds
Mat3 exp_integral(const Vec3& phi) {
  const double th = phi.norm();
  const Mat3 h = hat(phi);
  if (th < 1e-6) return Mat3::Identity() + h / 2.0 + h * h / 6.0;
  return Mat3::Identity() + (1.0 - std::cos(th)) / (th * th) * h +
         (th - std::sin(th)) / (th * th * th) * h * h;
}

Vec3 standard_normal3(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double a = g(rng), b = g(rng), c = g(rng);
  return {a, b, c};
}

class TruthTrack {
 public:
  explicit TruthTrack(const Scenario& sc) : sc_(sc) {
    const double hz = sc.truth_hz;
    const auto n = static_cast<std::size_t>(std::llround(sc.duration * hz));
    grid_.resize(n + 1);
    const double sx = sc.initial_swing_deg[0] * kDeg, sy = sc.initial_swing_deg[1] * kDeg;
    const Rotation3 tilt = exp_so3(Vec3(sx, 0.0, 0.0)) * exp_so3(Vec3(0.0, sy, 0.0));
    grid_[0].r = tilt * Vec3(0.0, 0.0, -sc.rope_length);
    for (std::size_t i = 0; i < n; ++i) {
      grid_[i + 1] = pendulum_step(grid_[i], sc.path, time(i), time(i + 1) - time(i));
    }
  }

  double time(std::size_t i) const { return static_cast<double>(i) / sc_.truth_hz; }
  std::size_t size() const { return grid_.size(); }
  const PendulumState& at_index(std::size_t i) const { return grid_[i]; }

  PendulumState at(double t) const {
    const double pos = t * sc_.truth_hz;
    auto i = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
    i = std::min(i, grid_.size() - 1);
    const double dt = t - time(i);
    if (dt <= 1e-12) return grid_[i];
    return pendulum_step(grid_[i], sc_.path, time(i), dt);
  }

 private:
  const Scenario& sc_;
  std::vector<PendulumState> grid_;
};

bool in_dropout(const Scenario& sc, double t) {
  for (const auto& [a, b] : sc.dropouts) {
    if (t >= a && t < b) return true;
  }
  return false;
}

bool visible(const Scenario& sc, const Vec3& p_cam, double radius) {
  if (p_cam.z() < 0.5) return false;
  const auto& k = sc.camera.k;
  const double u = k.fx * p_cam.x() / p_cam.z() + k.cx;
  const double v = k.fy * p_cam.y() / p_cam.z() + k.cy;
  const double margin = k.fx * radius / p_cam.z() + 2.0;
  return u > margin && v > margin && u < sc.camera.width - margin && v < sc.camera.height - margin;
}

std::vector<MeasurementEvent> vision_frame(const Scenario& sc, double t, const FilterState& x,
                                           const UavState& uav, Rng& noise_rng, Rng& occl_rng,
                                           SimOutput& out) {
  const Rotation3 r_cg = sc.camera.r_cb * uav.r_gb.inverse();
  const std::size_t m = sc.markers.size();
  std::vector<std::vector<CirclePose>> cands(m);
  std::uniform_real_distribution<double> start_deg(0.0, 360.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3 y_true = true_marker_position(x, uav, sc.camera, i);
    if (!visible(sc, y_true, sc.markers[i].radius)) continue;
    CirclePose truth_pose{y_true, (r_cg * x.R) * Vec3::UnitZ()};
    const Conic c = project_circle(truth_pose, sc.markers[i].radius, sc.camera.k);
    std::vector<std::pair<double, double>> occl;
    if (sc.occlusion_deg > 0.0) {
      const double s = start_deg(occl_rng);
      occl.emplace_back(s, s + sc.occlusion_deg);
    }
    DetectionPatch patch{t, i, c, render_segments(c, occl, sc.pixel_noise, &noise_rng)};
    try {
      const auto dets = detect_ellipses(patch.segments);
      if (!dets.empty()) {
        const auto best = std::max_element(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
          return a.inlier_ratio < b.inlier_ratio;
        });
        cands[i] = circle_pose_candidates(normalize_conic(best->conic, sc.camera.k),
                                          sc.markers[i].radius);
      }
    } catch (const Error&) {
      cands[i].clear();
    }
    if (cands[i].empty()) ++out.vision_failures;
    out.patches.push_back(std::move(patch));
  }

  std::vector<std::optional<CirclePose>> chosen(m);
  if (m >= 2 && !cands[0].empty() && !cands[1].empty()) {
    const auto [a, b] = resolve_two_markers(cands[0], cands[1]);
    chosen[0] = a;
    chosen[1] = b;
  }
  const Vec3 fallback_n = chosen[0] ? chosen[0]->n : -Vec3::UnitZ();
  for (std::size_t i = 0; i < m; ++i) {
    if (!chosen[i] && !cands[i].empty()) chosen[i] = select_by_normal(cands[i], fallback_n);
  }

  std::vector<MeasurementEvent> evs;
  for (std::size_t i = 0; i < m; ++i) {
    if (!chosen[i]) continue;
    const Vec3 y = marker_position_measurement(*chosen[i]);
    const double infl = sc.vision_noise_inflation;
    MeasurementEvent ev;
    ev.t = t;
    ev.kind = MarkerMeas{i, y, r_cg, uav.p, sc.camera.t_cb};
    ev.noise = infl * infl * marker_covariance(y, sc.markers[i].radius, sc.camera.k.fx, sc.pixel_noise);
    evs.push_back(std::move(ev));
  }
  return evs;
}

}  // namespace

SimOutput simulate(const Scenario& sc, std::uint64_t seed) {
  sc.validate();
  SimOutput out;
  const TruthTrack track(sc);

  // Ground truth and IMU at the IMU epochs.
  const auto stride = static_cast<std::size_t>(std::llround(sc.truth_hz / sc.imu_hz));
  for (std::size_t i = 0; i < track.size(); i += stride) {
    const double t = track.time(i);
    const UavState uav = uav_state(sc.path, t);
    out.truth.t.push_back(t);
    out.truth.uav.push_back(uav);
    out.truth.x.push_back(make_state(sc, track.at_index(i), uav, t));
  }
  Rng imu_rng = make_rng(seed, kImuStream);
  const std::size_t ne = out.truth.t.size();
  for (std::size_t k = 0; k + 1 < ne; ++k) {
    // Increment-consistent sample: a zero-order hold over the interval
    // reproduces the true rotation and velocity increments.
    const FilterState& x0 = out.truth.x[k];
    const FilterState& x1 = out.truth.x[k + 1];
    const double dt = out.truth.t[k + 1] - out.truth.t[k];
    const Vec3 phi = log_so3(x0.R.inverse() * x1.R);
    const Vec3 f_world = (x1.v - x0.v) / dt + kGravityVec;
    ImuSample s;
    s.t = out.truth.t[k];
    s.w = phi / dt;
    s.a = exp_integral(phi).inverse() * (x0.R.inverse() * f_world);
    s.w += std::sqrt(sc.imu_noise.gyro / dt) * standard_normal3(imu_rng);
    s.a += std::sqrt(sc.imu_noise.accel / dt) * standard_normal3(imu_rng);
    out.imu.push_back(s);
  }
  if (!out.imu.empty()) {
    ImuSample last = out.imu.back();
    last.t = out.truth.t.back();
    out.imu.push_back(last);
  }

  auto truth_at = [&](double t) {
    const UavState uav = uav_state(sc.path, t);
    return std::make_pair(make_state(sc, track.at(t), uav, t), uav);
  };
  const double t_end = out.truth.t.back();
  auto epochs = [&](double hz) {
    std::vector<double> ts;
    for (std::size_t j = 0;; ++j) {
      const double t = static_cast<double>(j) / hz;
      if (t > t_end + 1e-12) break;
      ts.push_back(t);
    }
    return ts;
  };

  Rng rot_rng = make_rng(seed, kRotStream);
  for (double t : epochs(sc.rotation_hz)) {
    const auto [x, uav] = truth_at(t);
    MeasurementEvent ev;
    ev.t = t;
    ev.kind = RotationMeas{x.R * exp_so3(sc.rotation_sigma * standard_normal3(rot_rng))};
    ev.noise = Mat3::Identity() * (sc.rotation_sigma * sc.rotation_sigma);
    out.measurements.push_back(std::move(ev));
  }
  for (double t : epochs(sc.rope_hz)) {
    const auto [x, uav] = truth_at(t);
    MeasurementEvent ev;
    ev.t = t;
    ev.kind = RopeMeas{uav.p};
    ev.noise = MatX::Constant(1, 1, sc.rope_sigma * sc.rope_sigma);
    out.measurements.push_back(std::move(ev));
  }

  Rng marker_rng = make_rng(seed, kMarkerStream);
  Rng vision_rng = make_rng(seed, kVisionStream);
  Rng occl_rng = make_rng(seed, kOcclStream);
  const Rotation3 r_cb = sc.camera.r_cb;
  for (double t : epochs(sc.camera_hz)) {
    const auto [x, uav] = truth_at(t);
    if (in_dropout(sc, t)) continue;
    if (sc.mode == MeasurementMode::Vision) {
      for (auto& ev : vision_frame(sc, t, x, uav, vision_rng, occl_rng, out)) {
        out.measurements.push_back(std::move(ev));
      }
      continue;
    }
    const Rotation3 r_cg = r_cb * uav.r_gb.inverse();
    for (std::size_t i = 0; i < sc.markers.size(); ++i) {
      const Vec3 y_true = true_marker_position(x, uav, sc.camera, i);
      // Noise is drawn even for markers out of view to keep the stream aligned.
      const Vec3 n = standard_normal3(marker_rng);
      if (!visible(sc, y_true, sc.markers[i].radius)) continue;
      const Mat3 cov = marker_covariance(y_true, sc.markers[i].radius, sc.camera.k.fx, sc.pixel_noise);
      const Mat3 l = Eigen::LLT<Mat3>(cov).matrixL();
      MeasurementEvent ev;
      ev.t = t;
      ev.kind = MarkerMeas{i, y_true + l * n, r_cg, uav.p, sc.camera.t_cb};
      ev.noise = cov;
      out.measurements.push_back(std::move(ev));
    }
  }
  std::stable_sort(out.measurements.begin(), out.measurements.end(),
                   [](const MeasurementEvent& a, const MeasurementEvent& b) { return a.t < b.t; });
  return out;
}

}  // namespace vcloc
