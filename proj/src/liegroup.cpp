#include "vcloc/liegroup.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "vcloc/error.hpp"

namespace vcloc {

namespace {
constexpr double kSmallAngle = 1e-6;
}

Rotation3 Rotation3::from_matrix(const Mat3& m, double tol) {
  const double ortho = (m * m.transpose() - Mat3::Identity()).norm();
  const double det = m.determinant();
  if (!(ortho <= tol) || !(std::abs(det - 1.0) <= tol)) {
    throw Error(ErrorCode::NonOrthogonal,
                "orthogonality residual " + std::to_string(ortho) + ", det " + std::to_string(det));
  }
  return Rotation3(m, Trusted{});
}

Rotation3 Rotation3::project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return Rotation3(svd.matrixU() * d * svd.matrixV().transpose(), Trusted{});
}

double Rotation3::orthogonality_error() const {
  return (m_ * m_.transpose() - Mat3::Identity()).norm();
}

Mat3 hat(const Vec3& phi) {
  Mat3 m;
  m << 0.0, -phi.z(), phi.y(),
       phi.z(), 0.0, -phi.x(),
       -phi.y(), phi.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

Rotation3 exp_so3(const Tangent3& phi) {
  const double theta = phi.norm();
  const Mat3 k = hat(phi);
  if (theta < kSmallAngle) {
    return Rotation3(Mat3::Identity() + k + 0.5 * k * k, Rotation3::Trusted{});
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Rotation3(Mat3::Identity() + a * k + b * k * k, Rotation3::Trusted{});
}

Tangent3 log_so3(const Rotation3& r, LogBranch* branch) {
  const Mat3& m = r.matrix();
  // 2 sin(theta) * axis
  const Vec3 w{m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    if (branch) *branch = LogBranch::SmallAngle;
    return 0.5 * (1.0 + theta * theta / 6.0) * w;
  }
  if (std::numbers::pi - theta >= kSmallAngle) {
    if (branch) *branch = LogBranch::Regular;
    return theta / (2.0 * std::sin(theta)) * w;
  }

  if (branch) *branch = LogBranch::NearPi;
  const Mat3 sym = 0.5 * (0.5 * (m + m.transpose()) + Mat3::Identity());
  Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
  Vec3 axis = es.eigenvectors().col(2).normalized();
  if (w.norm() > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Rotation3 ConcentratedGaussian::sample(const Vec3& standard_normal) const {
  Eigen::LDLT<Mat3> ldlt(cov);
  const Vec3 d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Vec3 xi = ldlt.matrixL() * d.cwiseProduct(standard_normal);
  xi = ldlt.transpositionsP().transpose() * xi;
  return mean * exp_so3(xi);
}

bool ConcentratedGaussian::valid(double sym_tol, double eig_tol) const {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > sym_tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (cov + cov.transpose()));
  return es.eigenvalues().minCoeff() >= -eig_tol;
}

}  // namespace vcloc
