#include "reifsplit/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace reifsplit {

KdTree::KdTree(const Eigen::MatrixXd* points)
    : points_(points), dim_(static_cast<int>(points->rows())) {
  order_.resize(static_cast<std::size_t>(points->cols()));
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(order_.size()));
  }
}

double KdTree::squared_distance(const double* a, std::size_t idx) const {
  const double* p = point(idx);
  double s = 0.0;
  for (int d = 0; d < dim_; ++d) {
    const double t = a[d] - p[d];
    s += t * t;
  }
  return s;
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  const std::size_t count = end - begin;
  const bool leaf = (id == 0 && order_.size() < kBruteForceBelow) || count <= kLeafSize;
  if (leaf) return id;

  int axis = 0;
  double widest = -1.0;
  for (int d = 0; d < dim_; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      const double v = point(order_[i])[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = d;
    }
  }
  if (widest <= 0.0) return id;  // all points coincide

  const std::uint32_t mid = begin + static_cast<std::uint32_t>(count / 2);
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return point(a)[axis] < point(b)[axis]; });
  const double split = point(order_[mid])[axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::pair<std::size_t, double> KdTree::nearest(const double* query) const {
  std::size_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  // Explicit stack of (node, lower bound on squared distance).
  std::vector<std::pair<std::uint32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0u, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > best_sq) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double sq = squared_distance(query, order_[i]);
        if (sq < best_sq || (sq == best_sq && order_[i] < best)) {
          best_sq = sq;
          best = order_[i];
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  return {best, std::sqrt(best_sq)};
}

std::vector<std::size_t> KdTree::within(const double* query, double radius) const {
  std::vector<std::size_t> out;
  if (order_.empty() || radius < 0.0) return out;
  const double r_sq = radius * radius;
  std::vector<std::uint32_t> stack{0u};
  while (!stack.empty()) {
    const std::uint32_t id = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        if (squared_distance(query, order_[i]) <= r_sq) out.push_back(order_[i]);
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    if (diff - radius <= 0.0) stack.push_back(node.left);
    if (diff + radius >= 0.0) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<double, std::size_t>> KdTree::knn(const double* query,
                                                       std::size_t count) const {
  std::vector<std::pair<double, std::size_t>> heap;  // max-heap on squared distance
  if (order_.empty() || count == 0) return heap;
  auto worst = [&]() {
    return heap.size() < count ? std::numeric_limits<double>::infinity() : heap.front().first;
  };
  std::vector<std::pair<std::uint32_t, double>> stack;
  stack.emplace_back(0u, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double sq = squared_distance(query, order_[i]);
        if (sq < worst()) {
          heap.emplace_back(sq, order_[i]);
          std::push_heap(heap.begin(), heap.end());
          if (heap.size() > count) {
            std::pop_heap(heap.begin(), heap.end());
            heap.pop_back();
          }
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  std::sort(heap.begin(), heap.end());
  for (auto& e : heap) e.first = std::sqrt(e.first);
  return heap;
}

}  // namespace reifsplit
