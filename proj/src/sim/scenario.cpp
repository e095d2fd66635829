#include <cmath>

#include "vcloc/error.hpp"
#include "vcloc/sim.hpp"

namespace vcloc {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

void Scenario::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(duration) || !positive(truth_hz) || !positive(imu_hz) || !positive(camera_hz) ||
      !positive(rotation_hz) || !positive(rope_hz)) {
    throw Error(ErrorCode::InvalidScenario, "durations and rates must be positive");
  }
  if (!positive(rope_length)) throw Error(ErrorCode::InvalidScenario, "rope length must be positive");
  const double ratio = truth_hz / imu_hz;
  if (ratio < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw Error(ErrorCode::InvalidScenario, "truth rate must be an integer multiple of the IMU rate");
  }
  if (markers.empty()) throw Error(ErrorCode::InvalidScenario, "at least one marker is required");
  for (const auto& m : markers) {
    if (!positive(m.radius)) throw Error(ErrorCode::InvalidScenario, "marker radius must be positive");
  }
  if (!path.static_pivot) {
    if (!positive(path.speed) || !positive(path.leg_length) || path.legs < 1 ||
        !positive(path.reversal_time) || (path.legs > 1 && !positive(path.extent))) {
      throw Error(ErrorCode::InvalidScenario, "invalid survey path");
    }
  }
  if (!camera.k.valid() || camera.width <= 0 || camera.height <= 0) {
    throw Error(ErrorCode::InvalidScenario, "invalid camera");
  }
  if (pixel_noise < 0.0 || rotation_sigma <= 0.0 || rope_sigma <= 0.0 ||
      vision_noise_inflation <= 0.0 || imu_noise.gyro < 0.0 || imu_noise.accel < 0.0) {
    throw Error(ErrorCode::InvalidScenario, "invalid noise settings");
  }
  for (const auto& [a, b] : dropouts) {
    if (!(b >= a)) throw Error(ErrorCode::InvalidScenario, "dropout window must have t1 >= t0");
  }
}

Scenario pendulum_basic() {
  Scenario sc;
  sc.markers = {{0.2684 / 2.0, Vec3(0.3, 0.0, 0.05)}, {0.2196 / 2.0, Vec3(-0.3, 0.0, 0.05)}};
  return sc;
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "pendulum-basic") return pendulum_basic();
  if (name == "static-hover") {
    Scenario sc = pendulum_basic();
    sc.name = name;
    sc.path.static_pivot = true;
    sc.yaw_drift_amplitude_deg = 0.0;
    return sc;
  }
  throw Error(ErrorCode::InvalidScenario, "unknown scenario '" + name + "'");
}

}  // namespace vcloc
