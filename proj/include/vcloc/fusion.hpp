#pragma once

#include <Eigen/Core>
#include <functional>
#include <variant>
#include <vector>

#include "vcloc/liegroup.hpp"

namespace vcloc {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Gravity magnitude; the global frame is East-North-Up, so g = (0, 0, kGravity).
inline constexpr double kGravity = 9.80665;
inline const Vec3 kGravityVec{0.0, 0.0, kGravity};

/// Mixed group/vector state. Tangent layout:
/// [dR(3), dp(3), dv(3), dl(1), d(dt_CB)(3), dt_F1(3), ..., dt_Fm(3)].
struct FilterState {
  Rotation3 R;                 ///< load attitude R_GL
  Vec3 p = Vec3::Zero();       ///< p_GL (m)
  Vec3 v = Vec3::Zero();       ///< v_GL (m/s)
  double l = 1.0;              ///< rope length (m)
  Vec3 dt_cb = Vec3::Zero();   ///< camera-body translation misalignment (m)
  std::vector<Vec3> t_f;       ///< fiducial offsets in the load frame (m)

  explicit FilterState(std::size_t markers = 2) : t_f(markers, Vec3::Zero()) {}
  int dim() const { return 13 + 3 * static_cast<int>(t_f.size()); }
};

namespace idx {
inline constexpr int R = 0, P = 3, V = 6, L = 9, DT = 10, TF = 13;
}

/// x (+) xi: R exp(xi_R), additive elsewhere.
FilterState oplus(const FilterState& x, const VecX& xi);
/// y (-) x: the xi with x (+) xi = y (rotation part log(R_x^T R_y)).
VecX ominus(const FilterState& y, const FilterState& x);

struct ImuSample {
  double t = 0.0;
  Vec3 w = Vec3::Zero();  ///< body angular rate (rad/s)
  Vec3 a = Vec3::Zero();  ///< body specific force (m/s^2)
};

/// Continuous-time process noise power spectral densities (per axis).
struct NoiseConfig {
  double gyro = 1e-6;       ///< rad^2/s
  double accel = 1e-4;      ///< m^2/s^3
  double rope = 1e-6;       ///< m^2/s   (l random walk)
  double misalign = 1e-6;   ///< m^2/s   (dt_CB random walk)
  double fiducial = 1e-6;   ///< m^2/s   (t_F random walk)
};

struct RotationMeas {
  Rotation3 r_ref;  ///< reference attitude R_GL, modeled as R exp(n)
};
struct MarkerMeas {
  std::size_t marker = 0;
  Vec3 y = Vec3::Zero();   ///< marker center in the camera frame (m)
  Rotation3 r_cg;          ///< global -> camera rotation
  Vec3 p_gb = Vec3::Zero();
  Vec3 t_cb = Vec3::Zero();
};
struct RopeMeas {
  Vec3 p_gb = Vec3::Zero();  ///< pivot (UAV body) position
};

struct MeasurementEvent {
  double t = 0.0;
  std::variant<RotationMeas, MarkerMeas, RopeMeas> kind;
  MatX noise;  ///< 3x3 (rotation, marker) or 1x1 (rope)
};

struct UkfConfig {
  double alpha = 1.0;
  double beta = 0.0;
  double kappa = 0.0;
  double max_dt = 0.02;           ///< integration substep cap (s)
  bool gate = false;              ///< Mahalanobis innovation gate
  double gate_probability = 0.997;
  int rotation_mean_iterations = 10;
  double rotation_mean_tol = 1e-10;
};

struct SigmaWeights {
  VecX wm;
  VecX wc;
  double lambda = 0.0;
};

/// Scaled unscented weights for tangent dimension n: lambda = alpha^2 (n + kappa) - n.
/// Throws InvalidScaling for n < 1 or n + lambda <= 0.
SigmaWeights sigma_weights(int n, double alpha, double beta, double kappa);

/// S with S S^T = P (Cholesky, pivoted LDL^T fallback for semidefinite P).
/// Throws CovarianceNotPSD if P has a clearly negative direction.
MatX psd_sqrt(const MatX& p);

struct Belief {
  FilterState x;
  MatX P;
};

/// One propagation step over dt with the IMU sample held constant.
/// Throws NonPositiveDt, CovarianceNotPSD.
Belief propagate(const Belief& b, const ImuSample& imu, double dt, const NoiseConfig& q,
                 const UkfConfig& cfg = {});

struct UpdateInfo {
  double nis = 0.0;       ///< innovation^T P_yy^-1 innovation
  bool rejected = false;  ///< dropped by the gate
};

/// Sequential update with one measurement event.
/// Throws SingularInnovationCovariance, DegenerateRopeGeometry.
Belief update(const Belief& b, const MeasurementEvent& meas, const UkfConfig& cfg = {},
              UpdateInfo* info = nullptr);

/// Unscented update for a vector measurement y = h(x, n), n ~ N(0, r).
using VectorModel = std::function<VecX(const FilterState&, const VecX&)>;
Belief update_vector(const Belief& b, const VectorModel& h, const VecX& y, const MatX& r,
                     const UkfConfig& cfg = {}, UpdateInfo* info = nullptr);

/// Deterministic process model for one sigma point (used by the simulator checks).
FilterState integrate(const FilterState& x, const Vec3& w, const Vec3& a, double dt,
                      double max_dt);

/// Noise-free measurement functions.
Vec3 predict_marker(const FilterState& x, const MarkerMeas& m);
double predict_rope(const FilterState& x, const Vec3& p_gb);

struct FilterConfig {
  NoiseConfig q;
  UkfConfig ukf;
  int record_stride = 1;  ///< keep every n-th IMU epoch in the trajectory
};

struct TrajectoryPoint {
  double t = 0.0;
  FilterState x;
  MatX P;
};

struct FilterStats {
  std::size_t updates = 0;
  std::size_t rejected = 0;  ///< gated out
  std::size_t failed = 0;    ///< numerically unusable (skipped)
};

/// Merges the streams by time: propagate (IMU zero-order hold) to each event,
/// update, and record the belief at IMU epochs. Measurements earlier than the
/// first IMU sample are ignored. Throws UnsortedStream.
std::vector<TrajectoryPoint> run_filter(const std::vector<ImuSample>& imu,
                                        const std::vector<MeasurementEvent>& meas,
                                        const Belief& init, const FilterConfig& cfg = {},
                                        FilterStats* stats = nullptr);

}  // namespace vcloc
