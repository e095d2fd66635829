#include "vcloc/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace vcloc {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<double> points, std::size_t dim)
    : pts_(std::move(points)), dim_(dim), n_(dim == 0 ? 0 : pts_.size() / dim) {
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (n_ > 0) build(0, n_, 0);
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  // Split on the axis of largest spread at the median.
  std::size_t axis = 0;
  double best_spread = -1.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = point(order_[begin])[d], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = std::min(lo, point(order_[i])[d]);
      hi = std::max(hi, point(order_[i])[d]);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      axis = d;
    }
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = point(a)[axis], pb = point(b)[axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = point(order_[mid])[axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = static_cast<int>(axis);
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const double* q, double r2, std::vector<std::size_t>& out) const {
  const Node& nd = nodes_[node];
  if (nd.axis < 0) {
    for (std::size_t i = nd.begin; i < nd.end; ++i) {
      const double* p = point(order_[i]);
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) d2 += (p[d] - q[d]) * (p[d] - q[d]);
      if (d2 <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = q[nd.axis] - nd.split;
  // Points equal to the split value may sit on either side; visit both then.
  if (diff <= 0.0 || diff * diff <= r2) search(nd.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) search(nd.right, q, r2, out);
}

std::vector<std::size_t> KdTree::radius_search(const double* q, double radius) const {
  std::vector<std::size_t> out;
  if (n_ == 0) return out;
  search(0, q, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vcloc
