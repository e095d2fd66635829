#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vcloc/detect.hpp"
#include "vcloc/fusion.hpp"
#include "vcloc/pose.hpp"
#include "vcloc/sim.hpp"

namespace vcloc {

/// Shortest form that round-trips: printf("%.17g").
std::string fmt(double v);

// All readers throw ParseError with a line number on malformed input.

/// CSV rows `x0,y0,x1,y1`; '#' comments and a header row are skipped.
/// Straightness is derived from the length (endpoint_straightness).
std::vector<LineSegment> read_segments(std::istream& in);
void write_segments(std::ostream& out, const std::vector<LineSegment>& segs);

/// JSON Lines with cx, cy, a, b, theta, inlier_ratio, coverage_deg. Extra
/// fields `t` and `marker` are written when given (t < 0 / marker < 0 omit them).
void write_detection(std::ostream& out, const DetectedEllipse& d, double t = -1.0, int marker = -1);

struct DetectionRecord {
  DetectedEllipse det;
  double t = 0.0;
  int marker = -1;
};
std::vector<DetectionRecord> read_detections(std::istream& in);

/// CSV `t,wx,wy,wz,ax,ay,az` with a header row.
std::vector<ImuSample> read_imu(std::istream& in);
void write_imu(std::ostream& out, const std::vector<ImuSample>& imu);

/// JSON Lines `{t, kind, payload, noise}`, kind in {rotation, marker, rope}.
std::vector<MeasurementEvent> read_measurements(std::istream& in);
void write_measurements(std::ostream& out, const std::vector<MeasurementEvent>& meas);

/// Trajectory CSV: t,px,py,pz,vx,vy,vz,l,qw,qx,qy,qz,dtx,dty,dtz,f<i>x,f<i>y,f<i>z...
/// followed (when covariances are present) by one 1-sigma column per tangent
/// coordinate and the position cross-covariances pxy,pxz,pyz.
void write_trajectory(std::ostream& out, const std::vector<TrajectoryPoint>& traj,
                      bool with_sigma = true);
std::vector<TrajectoryPoint> read_trajectory(std::istream& in);

std::vector<TrajectoryPoint> truth_as_trajectory(const GroundTruth& truth);

/// Scenario files are JSON objects with "schema": 1; absent keys keep the
/// pendulum-basic defaults.
Scenario read_scenario(std::istream& in);
void write_scenario(std::ostream& out, const Scenario& sc);

/// Marker pose records written by the pose stage.
struct PoseRecord {
  double t = 0.0;
  int marker = 0;
  CirclePose pose;
  std::vector<CirclePose> candidates;
};
void write_pose(std::ostream& out, const PoseRecord& rec);

}  // namespace vcloc
