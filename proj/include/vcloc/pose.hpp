#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "vcloc/conic.hpp"
#include "vcloc/liegroup.hpp"

namespace vcloc {

/// Pinhole intrinsics, u_pix = K u_norm.
struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  double skew = 0.0;

  Mat3 matrix() const;
  bool valid() const { return fx > 0.0 && fy > 0.0; }
};

/// Circle center and plane normal in the camera frame (z forward).
struct CirclePose {
  Vec3 p = Vec3::Zero();
  Vec3 n = -Vec3::UnitZ();
};

/// Moves a pixel conic to the normalized image plane: K^T c K.
Conic normalize_conic(const Conic& c, const CameraIntrinsics& k);

/// Image conic of a circle of `radius` with the given pose (pixels when `k`
/// is supplied, normalized coordinates otherwise). Normalized (||C||_F = 1).
Conic project_circle(const CirclePose& pose, double radius);
Conic project_circle(const CirclePose& pose, double radius, const CameraIntrinsics& k);

/// Closed-form circle poses explaining a normalized-plane conic, filtered by
/// chirality (n_z < 0, p_z > 0). Generic conics give two candidates, a
/// fronto-parallel view (lambda1 == lambda2 within 1e-9 relative) gives one.
/// Throws BadSignature unless the eigen-signature is {2,1}, NotNormalized for
/// a zero or non-finite matrix.
std::vector<CirclePose> circle_pose_candidates(const Conic& c_norm, double radius);

/// Index pair (i, j) maximizing n1_i . n2_j; ties keep the smaller indices.
std::pair<std::size_t, std::size_t> resolve_indices(const std::vector<CirclePose>& cands1,
                                                    const std::vector<CirclePose>& cands2);
std::pair<CirclePose, CirclePose> resolve_two_markers(const std::vector<CirclePose>& cands1,
                                                      const std::vector<CirclePose>& cands2);

/// Single-marker fallback: the candidate whose normal is closest to `predicted_n`.
CirclePose select_by_normal(const std::vector<CirclePose>& cands, const Vec3& predicted_n);

inline Vec3 marker_position_measurement(const CirclePose& pose) { return pose.p; }

}  // namespace vcloc
