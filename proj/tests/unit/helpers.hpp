#pragma once

#include <cmath>
#include <random>

#include "reifsplit/linalg.hpp"

namespace testing_helpers {

using reifsplit::Matrix;
using reifsplit::Vector;

inline Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Vector gaussian_vector(std::mt19937_64& rng, int n) { return gaussian(rng, n, 1).col(0); }

inline Matrix orthogonal(std::mt19937_64& rng, int n) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, n));
  return qr.householderQ();
}

inline reifsplit::LinearSubspace random_subspace(std::mt19937_64& rng, int k, int n) {
  return reifsplit::LinearSubspace::from_spanning_rows(gaussian(rng, k, n));
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace testing_helpers
