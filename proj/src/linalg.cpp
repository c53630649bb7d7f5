#include "reifsplit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "reifsplit/error.hpp"

namespace reifsplit {

double inverse_condition(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

QrFactors qr_decompose(const Matrix& m) {
  const Eigen::Index k = m.rows();
  const Eigen::Index n = m.cols();
  if (k < 1 || n < k) {
    std::ostringstream os;
    os << "qr_decompose: expected k x n with 1 <= k <= n, got " << k << " x " << n;
    throw DimensionMismatchError(os.str());
  }
  if (!m.allFinite()) throw InvalidArgumentError("qr_decompose: non-finite entries");
  if (inverse_condition(m) <= kRankThreshold) {
    throw RankDeficientError("qr_decompose: matrix is numerically rank deficient");
  }

  QrFactors out{Matrix::Zero(k, k), Matrix::Zero(k, n)};
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector v = m.row(i).transpose();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double c = out.frame.row(j).dot(v);
        v -= c * out.frame.row(j).transpose();
        out.lower(i, j) += c;
      }
    }
    const double norm = v.norm();
    if (!(norm > 0.0)) throw RankDeficientError("qr_decompose: zero pivot");
    out.lower(i, i) = norm;
    out.frame.row(i) = v.transpose() / norm;
  }
  return out;
}

std::pair<double, double> qr_perturbation_gap(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatchError("qr_perturbation_gap: shape mismatch");
  }
  const QrFactors qa = qr_decompose(a);
  const QrFactors qb = qr_decompose(b);
  const Matrix rel = qa.lower.triangularView<Eigen::Lower>().solve(qb.lower);
  const Matrix id = Matrix::Identity(a.rows(), a.rows());
  return {operator_norm(rel - id), operator_norm(qa.frame - qb.frame)};
}

LinearSubspace LinearSubspace::from_spanning_rows(const Matrix& rows) {
  return LinearSubspace(qr_decompose(rows).frame);
}

LinearSubspace LinearSubspace::from_frame(Matrix frame) {
  if (frame.rows() < 1 || frame.cols() < frame.rows()) {
    throw DimensionMismatchError("LinearSubspace: frame must be k x n with 1 <= k <= n");
  }
  const Matrix gram = frame * frame.transpose();
  if ((gram - Matrix::Identity(frame.rows(), frame.rows())).norm() > kOrthonormalityTolerance) {
    throw InvalidArgumentError("LinearSubspace: frame rows are not orthonormal");
  }
  return LinearSubspace(std::move(frame));
}

LinearSubspace LinearSubspace::coordinate(int k, int n) {
  if (k < 1 || n < k) throw DimensionMismatchError("LinearSubspace::coordinate: need 1 <= k <= n");
  Matrix f = Matrix::Zero(k, n);
  f.leftCols(k).setIdentity();
  return LinearSubspace(std::move(f));
}

namespace {

void require_compatible(const LinearSubspace& l1, const LinearSubspace& l2) {
  if (l1.ambient_dim() != l2.ambient_dim() || l1.dim() != l2.dim()) {
    std::ostringstream os;
    os << "subspace dimensions differ: (" << l1.dim() << "," << l1.ambient_dim() << ") vs ("
       << l2.dim() << "," << l2.ambient_dim() << ")";
    throw DimensionMismatchError(os.str());
  }
}

}  // namespace

double subspace_distance(const LinearSubspace& l1, const LinearSubspace& l2) {
  require_compatible(l1, l2);
  const Matrix diff = l1.projector() - l2.projector();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(diff, Eigen::EigenvaluesOnly);
  const double d = eig.eigenvalues().cwiseAbs().maxCoeff();
  return std::clamp(d, 0.0, 1.0);
}

double subspace_distance_supform(const LinearSubspace& l1, const LinearSubspace& l2,
                                 std::size_t samples, std::uint64_t seed) {
  require_compatible(l1, l2);
  if (samples < 100) throw InvalidArgumentError("subspace_distance_supform: need >= 100 samples");

  const Matrix& f1 = l1.frame();
  const int k = l1.dim();
  auto gap = [&](const Vector& u) {
    const Vector v = f1.transpose() * u;
    return l2.distance_to(v);
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_unit = [&]() {
    Vector u(k);
    do {
      for (int i = 0; i < k; ++i) u(i) = normal(rng);
    } while (u.norm() < 1e-12);
    return Vector(u.normalized());
  };

  Vector best_u = Vector::Unit(k, 0);
  double best = gap(best_u);
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector u = random_unit();
    const double g = gap(u);
    if (g > best) {
      best = g;
      best_u = u;
    }
  }
  if (k == 1) return best;

  // Hill climb on the sphere starting from the best sample.
  double step = 0.1;
  while (step > 1e-9) {
    bool improved = false;
    for (int trial = 0; trial < 8 * k; ++trial) {
      Vector u = best_u + step * random_unit();
      u.normalize();
      const double g = gap(u);
      if (g > best) {
        best = g;
        best_u = u;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

bool same_subspace(const LinearSubspace& l1, const LinearSubspace& l2) {
  return subspace_distance(l1, l2) <= kSubspaceEqualityTolerance;
}

LinearSubspace orthogonal_complement(const LinearSubspace& l) {
  const int k = l.dim();
  const int n = l.ambient_dim();
  if (k >= n) {
    throw InvalidArgumentError("orthogonal_complement: complement of the full space is {0}");
  }
  Matrix basis(n, n);
  basis.topRows(k) = l.frame();
  std::vector<bool> used(n, false);
  for (int row = k; row < n; ++row) {
    // Pick the coordinate vector with the largest residual against the current basis.
    int best_axis = -1;
    double best_norm = -1.0;
    Vector best_residual;
    for (int axis = 0; axis < n; ++axis) {
      if (used[axis]) continue;
      Vector v = Vector::Unit(n, axis);
      for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < row; ++j) v -= basis.row(j).dot(v) * basis.row(j).transpose();
      }
      const double nv = v.norm();
      if (nv > best_norm) {
        best_norm = nv;
        best_axis = axis;
        best_residual = v;
      }
    }
    used[best_axis] = true;
    basis.row(row) = best_residual.transpose() / best_norm;
  }
  return LinearSubspace::from_frame(basis.bottomRows(n - k));
}

Matrix align_frame(const LinearSubspace& l, const Matrix& reference) {
  if (reference.rows() != l.dim() || reference.cols() != l.ambient_dim()) {
    throw DimensionMismatchError("align_frame: reference shape mismatch");
  }
  const Matrix overlap = reference * l.frame().transpose();  // k x k
  Eigen::JacobiSVD<Matrix> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
  return rot * l.frame();
}

Vector project_onto(const AffinePlane& plane, const Vector& x) {
  if (x.size() != plane.base.size() || plane.direction.ambient_dim() != x.size()) {
    throw DimensionMismatchError("project_onto: dimension mismatch");
  }
  return plane.base + plane.direction.project(x - plane.base);
}

}  // namespace reifsplit
