#include "vcloc/fit.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "vcloc/error.hpp"

namespace vcloc {

FitNormalization FitNormalization::for_patch(const Vec2& center, double half_diagonal) {
  FitNormalization n;
  n.offset = center;
  n.scale = half_diagonal > 0.0 ? std::sqrt(2.0) / half_diagonal : 1.0;
  return n;
}

Eigen::Matrix3d FitNormalization::matrix() const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = scale;
  m(1, 1) = scale;
  m(0, 2) = -scale * offset.x();
  m(1, 2) = -scale * offset.y();
  return m;
}

void ScatterAccumulator::add(const Vec2& p) {
  const Vec2 q = norm.apply(p);
  const double x = q.x(), y = q.y();
  Eigen::Matrix<double, 6, 1> alpha;
  alpha << x * x, x * y, y * y, x, y, 1.0;
  s.noalias() += alpha * alpha.transpose();
  ++n;
}

ScatterAccumulator& ScatterAccumulator::merge(const ScatterAccumulator& other) {
  if (!(norm == other.norm)) {
    throw Error(ErrorCode::DegenerateData, "cannot merge accumulators with different normalizations");
  }
  s += other.s;
  n += other.n;
  return *this;
}

ScatterAccumulator accumulate(ScatterAccumulator acc, std::span<const Vec2> points) {
  for (const auto& p : points) acc.add(p);
  return acc;
}

ScatterAccumulator merge(const ScatterAccumulator& a, const ScatterAccumulator& b) {
  ScatterAccumulator out = a;
  out.merge(b);
  return out;
}

Conic fit_direct(const ScatterAccumulator& acc) {
  if (acc.n < 6) {
    throw Error(ErrorCode::DegenerateData, "need at least 6 points, got " + std::to_string(acc.n));
  }
  // Blocks of the scatter matrix for the quadratic (x^2, xy, y^2) and linear
  // (x, y, 1) parts.
  const Eigen::Matrix3d s1 = acc.s.topLeftCorner<3, 3>();
  const Eigen::Matrix3d s2 = acc.s.topRightCorner<3, 3>();
  const Eigen::Matrix3d s3 = acc.s.bottomRightCorner<3, 3>();

  Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) {
    throw Error(ErrorCode::DegenerateData, "rank-deficient scatter (collinear points?)");
  }
  const Eigen::Matrix3d t = -lu.solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;
  // Premultiply by the inverse of the 3x3 constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d reduced;
  reduced.row(0) = 0.5 * m.row(2);
  reduced.row(1) = -m.row(1);
  reduced.row(2) = 0.5 * m.row(0);

  Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
  int best = -1;
  double best_cond = 0.0;
  double best_eig = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d v = es.eigenvectors().col(i).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    const double lambda = es.eigenvalues()(i).real();
    // The admissible eigenvector has positive constraint value; among several
    // (numerically) pick the one with the smallest eigenvalue.
    if (cond > 0.0 && (best < 0 || lambda < best_eig)) {
      best = i;
      best_cond = cond;
      best_eig = lambda;
    }
  }
  if (best < 0 || !(best_cond > 0.0)) {
    throw Error(ErrorCode::NoEllipseSolution, "no eigenvector satisfies 4AC - B^2 > 0");
  }
  const Eigen::Vector3d a1 = es.eigenvectors().col(best).real();
  const Eigen::Vector3d a2 = t * a1;
  const Conic normalized_conic(a1(0), 0.5 * a1(1), a1(2), 0.5 * a2(0), 0.5 * a2(1), a2(2));
  // Points satisfy p_n = N p, so the pixel conic is N^T C_n N.
  const Eigen::Matrix3d nm = acc.norm.matrix();
  return Conic::from_matrix(nm.transpose() * normalized_conic.matrix() * nm).normalized();
}

Conic fit_points(std::span<const Vec2> points) {
  FitNormalization norm;
  if (!points.empty()) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    double ss = 0.0;
    for (const auto& p : points) ss += (p - mean).squaredNorm();
    const double rms = std::sqrt(ss / static_cast<double>(points.size()));
    norm.offset = mean;
    norm.scale = rms > 0.0 ? std::sqrt(2.0) / rms : 1.0;
  }
  return fit_direct(accumulate(ScatterAccumulator(norm), points));
}

double algebraic_residual(const Conic& c, std::span<const Vec2> points) {
  const Conic cn = c.normalized();
  double r = 0.0;
  for (const auto& p : points) {
    const double d = cn.evaluate(p);
    r += d * d;
  }
  return r;
}

}  // namespace vcloc
