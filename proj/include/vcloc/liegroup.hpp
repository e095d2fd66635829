#pragma once

#include <Eigen/Core>

namespace vcloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-angle coefficients of an element of so(3), in radians.
using Tangent3 = Eigen::Vector3d;

/// Element of SO(3). Construction from an arbitrary matrix validates
/// orthogonality; products and exp() results are trusted.
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}

  /// Throws NonOrthogonal when ||m m^T - I||_F or |det(m) - 1| exceeds `tol`.
  static Rotation3 from_matrix(const Mat3& m, double tol = 1e-6);
  /// Projects onto SO(3) through the SVD (closest rotation in Frobenius norm).
  static Rotation3 project(const Mat3& m);

  static Rotation3 identity() { return {}; }

  const Mat3& matrix() const { return m_; }
  Rotation3 inverse() const { return Rotation3(m_.transpose(), Trusted{}); }

  Rotation3 operator*(const Rotation3& other) const {
    return Rotation3(m_ * other.m_, Trusted{});
  }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Frobenius residual of m m^T - I.
  double orthogonality_error() const;

 private:
  struct Trusted {};
  Rotation3(const Mat3& m, Trusted) : m_(m) {}
  friend Rotation3 exp_so3(const Tangent3& phi);

  Mat3 m_;
};

Mat3 hat(const Vec3& phi);
/// Inverse of hat(); reads the antisymmetric part of `m`.
Vec3 vee(const Mat3& m);

/// Closed-form exponential map. Below ||phi|| = 1e-6 a second-order Taylor
/// expansion replaces the Rodrigues coefficients.
Rotation3 exp_so3(const Tangent3& phi);

enum class LogBranch { SmallAngle, Regular, NearPi };

/// Logarithm map, returning phi with ||phi|| in [0, pi]. Within 1e-6 of pi the
/// axis is recovered as the dominant eigenvector of the symmetric part of
/// (R + I)/2; at exactly pi its sign is chosen so the leading nonzero entry is
/// positive (both signs are valid logarithms).
Tangent3 log_so3(const Rotation3& r, LogBranch* branch = nullptr);

/// P <- (P + P^T) / 2.
template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& p) {
  p = (0.5 * (p + p.transpose())).eval();
}

/// Gaussian on SO(3) concentrated around `mean`: R = mean * exp(xi^), xi ~ N(0, cov).
struct ConcentratedGaussian {
  Rotation3 mean;
  Mat3 cov = Mat3::Zero();

  /// Draws a sample given a standard-normal 3-vector.
  Rotation3 sample(const Vec3& standard_normal) const;
  /// The tangent-space residual of `r` with respect to the mean.
  Tangent3 residual(const Rotation3& r) const { return log_so3(mean.inverse() * r); }
  bool valid(double sym_tol = 1e-12, double eig_tol = 1e-12) const;
};

}  // namespace vcloc
