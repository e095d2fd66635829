#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vcloc/conic.hpp"
#include "vcloc/detect.hpp"
#include "vcloc/fusion.hpp"
#include "vcloc/pose.hpp"

namespace vcloc {

/// All simulator randomness comes from mt19937_64 streams seeded with
/// seed_seq{seed, stream id}, so every stream is reproducible on its own.
using Rng = std::mt19937_64;
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

struct MarkerSpec {
  double radius = 0.1342;              ///< outer circle radius (m)
  Vec3 t_lf = Vec3::Zero();            ///< center in the load frame (m)
};

/// Boustrophedon survey: `legs` parallel passes of `leg_length` along x,
/// spread over `extent` in y and joined by semicircular turns. The path is
/// flown forward, reversed with a cosine speed profile, flown back, and so on.
struct SurveyPath {
  bool static_pivot = false;   ///< hover at `origin` instead
  Vec3 origin{0.0, 0.0, 30.0};
  double leg_length = 60.0;
  double extent = 40.0;
  int legs = 3;
  double speed = 5.0;
  double reversal_time = 4.0;
  double yaw = 0.0;            ///< UAV heading (rad), held constant
};

struct CameraMount {
  CameraIntrinsics k{1500.0, 1500.0, 1352.0, 760.0, 0.0};
  int width = 2704;
  int height = 1520;
  /// Body -> camera rotation; the default looks straight down.
  Rotation3 r_cb = Rotation3::from_matrix(Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal());
  Vec3 t_cb{0.0, 0.0, -0.1};        ///< nominal body origin in the camera frame (m)
  Vec3 dt_cb_true{0.03, -0.02, 0.01};  ///< actual - nominal
};

enum class MeasurementMode { Synthetic, Vision };

struct Scenario {
  std::string name = "pendulum-basic";
  double duration = 120.0;
  double truth_hz = 1000.0;
  double imu_hz = 200.0;
  double camera_hz = 30.0;
  double rotation_hz = 50.0;
  double rope_hz = 10.0;

  double rope_length = 7.0;
  std::vector<MarkerSpec> markers;
  SurveyPath path;
  double initial_swing_deg[2] = {0.0, 0.0};  ///< about global x, then y
  double yaw_drift_amplitude_deg = 20.0;      ///< load heading oscillation
  double yaw_drift_period = 60.0;

  CameraMount camera;

  NoiseConfig imu_noise;             ///< gyro/accel PSDs used for the truth IMU noise
  double pixel_noise = 0.5;          ///< boundary noise (px)
  double rotation_sigma = 0.0035;    ///< reference attitude noise (rad)
  double rope_sigma = 0.005;         ///< virtual rope measurement softness (m)
  double vision_noise_inflation = 3.0;
  MeasurementMode mode = MeasurementMode::Synthetic;
  double occlusion_deg = 0.0;        ///< per-frame occluded arc in vision mode
  std::vector<std::pair<double, double>> dropouts;  ///< marker-free windows [t0, t1)

  /// Throws InvalidScenario on non-positive rates/lengths or bad rate ratios.
  void validate() const;
};

/// The default scenario: 60 m x 40 m lawnmower at 5 m/s, 7 m rope, two
/// markers of 26.84 cm and 21.96 cm outer diameter.
Scenario pendulum_basic();
/// Looks up a named built-in scenario ("pendulum-basic", "static-hover").
Scenario builtin_scenario(const std::string& name);

struct UavState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Rotation3 r_gb;
};

UavState uav_state(const SurveyPath& path, double t);

/// Relative pendulum state r = p_L - p_B and its rate.
struct PendulumState {
  Vec3 r = Vec3::Zero();
  Vec3 rdot = Vec3::Zero();
};

/// One RK4 step of the constrained spherical pendulum under a moving pivot.
PendulumState pendulum_step(const PendulumState& s, const SurveyPath& path, double t, double h);
/// Rope tension per unit mass over length (lambda in r'' = -g - lambda r - a_B).
double pendulum_lambda(const PendulumState& s, const Vec3& a_pivot);

/// Load attitude: body z along the rope toward the pivot, x toward `heading`.
Rotation3 load_attitude(const Vec3& r, double heading);

struct GroundTruth {
  std::vector<double> t;
  std::vector<FilterState> x;
  std::vector<UavState> uav;
};

struct DetectionPatch {
  double t = 0.0;
  std::size_t marker = 0;
  Conic true_conic;                  ///< pixels
  std::vector<LineSegment> segments; ///< detector input
};

struct SimOutput {
  GroundTruth truth;
  std::vector<ImuSample> imu;
  std::vector<MeasurementEvent> measurements;
  std::vector<DetectionPatch> patches;  ///< vision mode only
  std::size_t vision_failures = 0;      ///< frames where a visible marker was not recovered
};

/// Deterministic given (scenario, seed). Throws InvalidScenario.
SimOutput simulate(const Scenario& sc, std::uint64_t seed);

/// Boundary of an image ellipse sampled at 2 degree steps of the parametric
/// angle, with `occlusions` (parametric intervals in degrees, [from, to))
/// removed, points perturbed by N(0, noise_px^2), and consecutive samples
/// chunked into chords of about 8 px (2-10 samples). Chord endpoints are
/// sample points; straightness is the PCA ratio of the chunk with a 2 px band.
std::vector<LineSegment> render_segments(const Conic& conic,
                                         const std::vector<std::pair<double, double>>& occlusions,
                                         double noise_px, Rng* rng);

/// Marker position covariance in the camera frame for pixel noise `noise_px`:
/// lateral sigma d*s/f and depth sigma d*s/rho along the line of sight, where
/// s = noise_px*sqrt(2/180) and rho = f*radius/d.
Mat3 marker_covariance(const Vec3& p_cam, double radius, double focal, double noise_px);

/// Exact marker measurement for a true state.
Vec3 true_marker_position(const FilterState& x, const UavState& uav, const CameraMount& cam,
                          std::size_t marker);

/// Default initial covariance: sigmas R 0.05 rad, p 0.2 m, v 0.2 m/s,
/// l 0.5 m, dt_CB 0.1 m, t_F 0.05 m.
MatX default_initial_covariance(std::size_t markers);

/// x0 = truth (+) chol(P0) n with n standard normal.
FilterState sample_initial_state(const FilterState& truth, const MatX& p0, Rng* rng);

}  // namespace vcloc
