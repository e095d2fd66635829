#include "vcloc/pose.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

#include "vcloc/error.hpp"

namespace vcloc {

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, skew, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

Conic normalize_conic(const Conic& c, const CameraIntrinsics& k) {
  const Mat3 km = k.matrix();
  return Conic::from_matrix(km.transpose() * c.matrix() * km);
}

namespace {

// Any unit vector orthogonal to n.
Vec3 orthogonal_unit(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(helper).normalized();
}

// Largest-magnitude component made positive, for reproducible eigenvector signs.
Vec3 canonical_sign(const Vec3& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  return v[i] < 0.0 ? Vec3(-v) : v;
}

}  // namespace

Conic project_circle(const CirclePose& pose, double radius) {
  const Vec3 n = pose.n.normalized();
  const Vec3 u = orthogonal_unit(n);
  const Vec3 w = n.cross(u);
  Mat3 h;
  h.col(0) = radius * u;
  h.col(1) = radius * w;
  h.col(2) = pose.p;
  // Unit circle in plane coordinates, mapped through h.
  return transform_conic(Conic(1, 0, 1, 0, 0, -1), h).normalized();
}

Conic project_circle(const CirclePose& pose, double radius, const CameraIntrinsics& k) {
  const Conic cn = project_circle(pose, radius);
  return transform_conic(cn, k.matrix()).normalized();
}

std::vector<CirclePose> circle_pose_candidates(const Conic& c_norm, double radius) {
  Mat3 q = c_norm.matrix();
  const double scale = q.norm();
  if (!std::isfinite(scale) || scale == 0.0) {
    throw Error(ErrorCode::NotNormalized, "conic matrix is zero or not finite");
  }
  q /= scale;

  Eigen::SelfAdjointEigenSolver<Mat3> es(q);
  Vec3 lam = es.eigenvalues();
  Mat3 vec = es.eigenvectors();
  const double tol = 1e-12 * lam.cwiseAbs().maxCoeff();
  int neg = 0, pos = 0;
  for (int i = 0; i < 3; ++i) {
    if (lam[i] < -tol) ++neg;
    if (lam[i] > tol) ++pos;
  }
  if (neg == 2 && pos == 1) {
    // Global sign flip: eigenvalues negate and reverse order.
    lam = Vec3(-lam[2], -lam[1], -lam[0]);
    vec = Mat3((Mat3() << vec.col(2), vec.col(1), vec.col(0)).finished());
  } else if (!(neg == 1 && pos == 2)) {
    throw Error(ErrorCode::BadSignature, "conic eigen-signature is not {2,1}");
  }
  // Ascending order now reads lambda3 < 0 < lambda2 <= lambda1.
  const double l3 = lam[0], l2 = lam[1], l1 = lam[2];
  const Vec3 v1 = canonical_sign(vec.col(2));
  const Vec3 v3 = canonical_sign(vec.col(0));

  const double g1 = std::sqrt(std::max(0.0, (l1 - l2) / (l1 - l3)));
  const double g3 = std::sqrt(std::max(0.0, (l2 - l3) / (l1 - l3)));
  const double depth_scale = radius / std::sqrt(-l1 * l3);
  const bool fronto = std::abs(l1 - l2) < 1e-9 * std::abs(l1);

  std::vector<CirclePose> out;
  for (int s1 : {1, -1}) {
    for (int s2 : {1, -1}) {
      for (int s3 : {1, -1}) {
        CirclePose c;
        c.n = (s1 * g1 * v1 + s2 * g3 * v3).normalized();
        c.p = s3 * depth_scale * (s1 * l3 * g1 * v1 + s2 * l1 * g3 * v3);
        if (!(c.n.z() < 0.0 && c.p.z() > 0.0)) continue;
        if (fronto && !out.empty()) continue;
        out.push_back(c);
      }
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> resolve_indices(const std::vector<CirclePose>& cands1,
                                                    const std::vector<CirclePose>& cands2) {
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_dot = -2.0;
  for (std::size_t i = 0; i < cands1.size(); ++i) {
    for (std::size_t j = 0; j < cands2.size(); ++j) {
      const double d = cands1[i].n.dot(cands2[j].n);
      if (d > best_dot) {
        best_dot = d;
        best = {i, j};
      }
    }
  }
  return best;
}

std::pair<CirclePose, CirclePose> resolve_two_markers(const std::vector<CirclePose>& cands1,
                                                      const std::vector<CirclePose>& cands2) {
  const auto [i, j] = resolve_indices(cands1, cands2);
  return {cands1.at(i), cands2.at(j)};
}

CirclePose select_by_normal(const std::vector<CirclePose>& cands, const Vec3& predicted_n) {
  std::size_t best = 0;
  double best_dot = -2.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double d = cands[i].n.dot(predicted_n);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return cands.at(best);
}

}  // namespace vcloc
