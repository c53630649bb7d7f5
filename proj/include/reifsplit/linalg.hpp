#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

namespace reifsplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Relative singular-value floor below which a k x n matrix counts as rank deficient.
inline constexpr double kRankThreshold = 1e-12;
// Two frames span the same subspace when their distance is below this.
inline constexpr double kSubspaceEqualityTolerance = 1e-9;
inline constexpr double kOrthonormalityTolerance = 1e-10;

// M = lower * frame with `lower` k x k lower triangular (positive diagonal) and
// `frame` k x n with orthonormal rows.
struct QrFactors {
  Matrix lower;
  Matrix frame;
};

// Row-wise modified Gram-Schmidt with one reorthogonalization pass.
// Throws RankDeficientError when sigma_min <= kRankThreshold * sigma_max.
QrFactors qr_decompose(const Matrix& m);

// (|L(A)^-1 L(B) - I|, |pi(A) - pi(B)|) in the operator norm.
std::pair<double, double> qr_perturbation_gap(const Matrix& a, const Matrix& b);

// Largest / smallest singular value ratio helper; returns 0 for an all-zero matrix.
double inverse_condition(const Matrix& m);

// Operator (spectral) norm.
double operator_norm(const Matrix& m);

// A k-dimensional linear subspace of R^n stored by an orthonormal row frame.
class LinearSubspace {
 public:
  LinearSubspace() = default;

  // Orthonormalizes the rows with qr_decompose; rows must be independent.
  static LinearSubspace from_spanning_rows(const Matrix& rows);
  // Accepts a frame that is already orthonormal to kOrthonormalityTolerance.
  static LinearSubspace from_frame(Matrix frame);
  // R^k x {0}.
  static LinearSubspace coordinate(int k, int n);

  int dim() const { return static_cast<int>(frame_.rows()); }
  int ambient_dim() const { return static_cast<int>(frame_.cols()); }
  const Matrix& frame() const { return frame_; }

  Matrix projector() const { return frame_.transpose() * frame_; }
  Vector project(const Vector& v) const { return frame_.transpose() * (frame_ * v); }
  double distance_to(const Vector& v) const { return (v - project(v)).norm(); }

 private:
  explicit LinearSubspace(Matrix frame) : frame_(std::move(frame)) {}
  Matrix frame_;
};

// |P1 - P2|_op; both subspaces must share k and n.
double subspace_distance(const LinearSubspace& l1, const LinearSubspace& l2);

// Sampled estimate of sup_{v in l1, |v| = 1} d(v, l2), refined by a local
// hill climb on the unit sphere of l1. Independent of the projector route.
double subspace_distance_supform(const LinearSubspace& l1, const LinearSubspace& l2,
                                 std::size_t samples, std::uint64_t seed = 0);

bool same_subspace(const LinearSubspace& l1, const LinearSubspace& l2);

// Throws InvalidArgumentError for k == n (complement is zero-dimensional).
LinearSubspace orthogonal_complement(const LinearSubspace& l);

// Orthonormal frame of `l` closest (Frobenius) to `reference` (k x n).
Matrix align_frame(const LinearSubspace& l, const Matrix& reference);

struct AffinePlane {
  Vector base;
  LinearSubspace direction;
};

Vector project_onto(const AffinePlane& plane, const Vector& x);

}  // namespace reifsplit
