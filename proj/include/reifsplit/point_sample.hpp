#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "reifsplit/kdtree.hpp"
#include "reifsplit/linalg.hpp"

namespace reifsplit {

// Closed ball {y : |y - center| <= radius}.
struct Ball {
  Vector center;
  double radius = 1.0;

  Ball() = default;
  Ball(Vector c, double r);

  int dim() const { return static_cast<int>(center.size()); }
  bool contains(const Vector& x) const { return (x - center).norm() <= radius; }
};

struct NearestPoint {
  std::size_t index = 0;
  double distance = 0.0;
};

// Finite sample of a set S in R^n with declared resolution h: every point of the
// sampled continuum set lies within h of some sample point. Immutable; copies
// share the points and the spatial index.
class PointSample {
 public:
  PointSample() = default;
  // `points` is n x count, one point per column.
  PointSample(Matrix points, double resolution);
  static PointSample from_rows(const std::vector<Vector>& points, double resolution);

  int dim() const { return static_cast<int>(data_->points.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(data_->points.cols()); }
  double resolution() const { return data_->resolution; }
  const Matrix& points() const { return data_->points; }
  Vector point(std::size_t i) const { return data_->points.col(static_cast<Eigen::Index>(i)); }

  NearestPoint nearest(const Vector& q) const;
  double distance_to(const Vector& q) const { return nearest(q).distance; }
  std::vector<std::size_t> indices_within(const Vector& center, double radius) const;
  std::vector<std::size_t> indices_within(const Ball& ball) const {
    return indices_within(ball.center, ball.radius);
  }
  std::vector<NearestPoint> knn(const Vector& q, std::size_t count) const;

  // New sample made of the listed points, same resolution.
  PointSample subset(const std::vector<std::size_t>& indices) const;

 private:
  struct Data {
    Matrix points;
    double resolution = 0.0;
    KdTree tree;
  };
  std::shared_ptr<const Data> data_;
};

// max(max_a d(a, B), max_b d(b, A)).
double hausdorff_distance(const PointSample& a, const PointSample& b);

// inf{s : A cap ball within s of B, B cap ball within s of A}; distances go to the
// full other set. 0 when both restrictions are empty.
double local_hausdorff(const PointSample& a, const PointSample& b, const Ball& ball);

// min over pairs.
double set_distance(const PointSample& a, const PointSample& b);

// Points of A inside the closed ball; std::nullopt flags an empty restriction.
std::optional<PointSample> restrict_to(const PointSample& a, const Ball& ball);

// max over the given points (columns) of their distance to `target`; 0 if none.
double max_distance_to(const Matrix& points, const PointSample& target);

}  // namespace reifsplit
