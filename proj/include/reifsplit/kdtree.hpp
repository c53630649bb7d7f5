#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace reifsplit {

// Static kd-tree over the columns of a column-major point matrix. The matrix must
// outlive the tree and stay unmodified. Sets below kBruteForceBelow points are
// kept in a single leaf, so queries degrade to a linear scan.
class KdTree {
 public:
  static constexpr std::size_t kBruteForceBelow = 256;
  static constexpr std::size_t kLeafSize = 16;

  KdTree() = default;
  explicit KdTree(const Eigen::MatrixXd* points);

  // Index and distance of the nearest point. Requires a nonempty tree.
  std::pair<std::size_t, double> nearest(const double* query) const;
  // Indices of points with |p - query| <= radius, in ascending index order.
  std::vector<std::size_t> within(const double* query, double radius) const;
  // The `count` nearest points as (distance, index), closest first.
  std::vector<std::pair<double, std::size_t>> knn(const double* query, std::size_t count) const;

  std::size_t size() const { return order_.size(); }

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  const double* point(std::size_t idx) const { return points_->data() + idx * dim_; }
  double squared_distance(const double* a, std::size_t idx) const;

  const Eigen::MatrixXd* points_ = nullptr;
  int dim_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace reifsplit
