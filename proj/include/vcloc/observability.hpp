#pragma once

#include <Eigen/Core>
#include <vector>

#include "vcloc/fusion.hpp"

namespace vcloc {

/// Exogenous vehicle quantities, held constant over the analysis window.
struct UavPose {
  Rotation3 r_cg;            ///< global -> camera
  Vec3 p_gb = Vec3::Zero();  ///< pivot position
  Vec3 t_cb = Vec3::Zero();
};

/// Optional time derivatives of the IMU input at the evaluation instant:
/// w_dot[k] = d^(k+1) w / dt^(k+1), likewise for a. Missing orders are zero.
struct InputDerivatives {
  std::vector<Vec3> w_dot;
  std::vector<Vec3> a_dot;
};

/// Stacked Jacobians of h, L_f h, ..., L_f^order h with respect to the state
/// tangent (central differences, step 1e-5). Output rows per order:
/// rotation (3), each marker (3 each), rope (1). Rope rows are zero when the
/// load sits on the pivot (||rho|| < 1e-6), where the rope output is not
/// differentiable.
MatX observability_matrix(const FilterState& x, const ImuSample& input, int order,
                          const UavPose& uav = {}, const InputDerivatives& derivs = {});

/// Outputs and their time derivatives along the flow, [h; L_f h; ...].
VecX lie_derivatives(const FilterState& x, const ImuSample& input, int order,
                     const UavPose& uav = {}, const InputDerivatives& derivs = {},
                     const Rotation3* r_ref = nullptr);

struct ObservabilityReport {
  int rank = 0;
  int tangent_dim = 0;
  VecX singular_values;        ///< descending
  MatX deficient_directions;   ///< columns span the numerical null space
};

/// SVD rank with threshold tol_rel * sigma_1.
ObservabilityReport rank_report(const MatX& m, double tol_rel = 1e-8);

}  // namespace vcloc
