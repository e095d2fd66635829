#pragma once

#include <cstddef>
#include <vector>

namespace vcloc {

/// Static k-d tree over a fixed point set (row-major, `dim` coordinates per
/// point). Supports Euclidean radius queries; results are returned in
/// ascending index order so callers see a deterministic sequence.
class KdTree {
 public:
  KdTree(std::vector<double> points, std::size_t dim);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  const double* point(std::size_t i) const { return &pts_[i * dim_]; }

  /// Indices of all points p with ||p - q|| <= radius.
  std::vector<std::size_t> radius_search(const double* q, double radius) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range into order_
    int axis = -1;                   // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void search(int node, const double* q, double r2, std::vector<std::size_t>& out) const;

  std::vector<double> pts_;
  std::size_t dim_;
  std::size_t n_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace vcloc
