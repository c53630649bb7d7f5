#include "reifsplit/point_sample.hpp"

#include <algorithm>
#include <limits>

#include "reifsplit/error.hpp"

namespace reifsplit {

Ball::Ball(Vector c, double r) : center(std::move(c)), radius(r) {
  if (!(r > 0.0)) throw InvalidArgumentError("Ball: radius must be positive");
}

PointSample::PointSample(Matrix points, double resolution) {
  if (points.cols() == 0) throw EmptySetError("PointSample: no points");
  if (points.rows() < 1) throw DimensionMismatchError("PointSample: zero-dimensional points");
  if (!(resolution > 0.0)) throw InvalidArgumentError("PointSample: resolution must be positive");
  if (!points.allFinite()) throw InvalidArgumentError("PointSample: non-finite coordinates");
  auto data = std::make_shared<Data>();
  data->points = std::move(points);
  data->resolution = resolution;
  data->tree = KdTree(&data->points);
  data_ = std::move(data);
}

PointSample PointSample::from_rows(const std::vector<Vector>& points, double resolution) {
  if (points.empty()) throw EmptySetError("PointSample: no points");
  const auto n = points.front().size();
  Matrix m(n, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != n) throw DimensionMismatchError("PointSample: mixed dimensions");
    m.col(static_cast<Eigen::Index>(i)) = points[i];
  }
  return PointSample(std::move(m), resolution);
}

NearestPoint PointSample::nearest(const Vector& q) const {
  if (q.size() != dim()) throw DimensionMismatchError("PointSample::nearest: dimension mismatch");
  const auto [idx, dist] = data_->tree.nearest(q.data());
  return {idx, dist};
}

std::vector<std::size_t> PointSample::indices_within(const Vector& center, double radius) const {
  if (center.size() != dim()) throw DimensionMismatchError("PointSample: query dimension mismatch");
  return data_->tree.within(center.data(), radius);
}

std::vector<NearestPoint> PointSample::knn(const Vector& q, std::size_t count) const {
  if (q.size() != dim()) throw DimensionMismatchError("PointSample::knn: dimension mismatch");
  std::vector<NearestPoint> out;
  for (const auto& [d, i] : data_->tree.knn(q.data(), count)) out.push_back({i, d});
  return out;
}

PointSample PointSample::subset(const std::vector<std::size_t>& indices) const {
  Matrix m(dim(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    m.col(static_cast<Eigen::Index>(j)) = data_->points.col(static_cast<Eigen::Index>(indices[j]));
  }
  return PointSample(std::move(m), resolution());
}

double max_distance_to(const Matrix& points, const PointSample& target) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    worst = std::max(worst, target.distance_to(points.col(j)));
  }
  return worst;
}

namespace {

void require_same_dim(const PointSample& a, const PointSample& b) {
  if (a.dim() != b.dim()) throw DimensionMismatchError("point samples live in different R^n");
}

double restricted_sup(const PointSample& from, const PointSample& to, const Ball& ball) {
  double worst = 0.0;
  for (std::size_t i : from.indices_within(ball)) {
    worst = std::max(worst, to.distance_to(from.point(i)));
  }
  return worst;
}

}  // namespace

double hausdorff_distance(const PointSample& a, const PointSample& b) {
  require_same_dim(a, b);
  return std::max(max_distance_to(a.points(), b), max_distance_to(b.points(), a));
}

double local_hausdorff(const PointSample& a, const PointSample& b, const Ball& ball) {
  require_same_dim(a, b);
  if (ball.dim() != a.dim()) throw DimensionMismatchError("local_hausdorff: ball dimension mismatch");
  return std::max(restricted_sup(a, b, ball), restricted_sup(b, a, ball));
}

double set_distance(const PointSample& a, const PointSample& b) {
  require_same_dim(a, b);
  const PointSample& small = a.size() <= b.size() ? a : b;
  const PointSample& large = a.size() <= b.size() ? b : a;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < small.size(); ++i) {
    best = std::min(best, large.distance_to(small.point(i)));
  }
  return best;
}

std::optional<PointSample> restrict_to(const PointSample& a, const Ball& ball) {
  const auto idx = a.indices_within(ball);
  if (idx.empty()) return std::nullopt;
  if (idx.size() == a.size()) return a;
  return a.subset(idx);
}

}  // namespace reifsplit
