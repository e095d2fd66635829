#include <algorithm>
#include <limits>

#include "vcloc/error.hpp"
#include "vcloc/fusion.hpp"

namespace vcloc {

std::vector<TrajectoryPoint> run_filter(const std::vector<ImuSample>& imu,
                                        const std::vector<MeasurementEvent>& meas,
                                        const Belief& init, const FilterConfig& cfg,
                                        FilterStats* stats) {
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].t > imu[i - 1].t)) {
      throw Error(ErrorCode::UnsortedStream, "IMU timestamps must increase strictly");
    }
  }
  for (std::size_t j = 1; j < meas.size(); ++j) {
    if (meas[j].t < meas[j - 1].t) {
      throw Error(ErrorCode::UnsortedStream, "measurement timestamps must not decrease");
    }
  }
  std::vector<TrajectoryPoint> traj;
  if (imu.empty()) return traj;

  FilterStats local;
  FilterStats& st = stats ? *stats : local;
  Belief b = init;
  double t = imu[0].t;
  ImuSample held = imu[0];
  const int stride = std::max(1, cfg.record_stride);
  traj.push_back({t, b.x, b.P});

  auto advance = [&](double target) {
    if (target > t) {
      b = propagate(b, held, target - t, cfg.q, cfg.ukf);
      t = target;
    }
  };

  std::size_t i = 1, j = 0;
  while (j < meas.size() && meas[j].t < t) ++j;  // before the first IMU sample
  constexpr double kInf = std::numeric_limits<double>::infinity();
  while (i < imu.size() || j < meas.size()) {
    const double t_imu = i < imu.size() ? imu[i].t : kInf;
    const double t_meas = j < meas.size() ? meas[j].t : kInf;
    if (t_meas <= t_imu) {
      advance(t_meas);
      try {
        UpdateInfo info;
        b = update(b, meas[j], cfg.ukf, &info);
        ++st.updates;
        if (info.rejected) ++st.rejected;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularInnovationCovariance &&
            e.code() != ErrorCode::DegenerateRopeGeometry) {
          throw;
        }
        ++st.failed;
      }
      ++j;
    } else {
      advance(t_imu);
      held = imu[i];
      if (i % static_cast<std::size_t>(stride) == 0) traj.push_back({t, b.x, b.P});
      ++i;
    }
  }
  return traj;
}

}  // namespace vcloc
