#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "reifsplit/io.hpp"
#include "reifsplit/linalg.hpp"
#include "reifsplit/point_sample.hpp"

namespace reifsplit {

// A union of parallel k-planes x_a + direction approximating S inside `ball`.
// Offsets are points of the affine complement center + direction^perp.
struct SplittingCertificate {
  Ball ball;
  LinearSubspace direction;
  std::vector<Vector> offsets;
  double defect = 0.0;  // local Hausdorff distance to the plane union, over radius
  double offset_diameter = 0.0;
  bool converged = true;
  int iterations = 0;

  int k() const { return direction.dim(); }
  int n() const { return direction.ambient_dim(); }
};

struct DetectOptions {
  int max_iterations = 50;
  // Offsets from the threshold cover that accounts for both Hausdorff sides
  // (n - k = 1 only). When off, or for n - k > 1, single-linkage clusters of the
  // projections at threshold 4 * defect * r are used and offsets are cluster means.
  bool exact_offsets = true;
  // Local rotation search of the direction after the alternation, run when the
  // Grassmannian has at most this many rotation parameters k (n - k). 0 disables.
  int polish_max_parameters = 1;
  // Fit on at most this many points of S inside the ball (deterministic stride).
  std::size_t max_fit_points = 4000;
};

SplittingCertificate detect_splitting(const PointSample& s, const Ball& ball, int k, int max_sheets,
                                      const DetectOptions& options = {});

// Two-sided defect: exact distance from S cap ball to the plane union, and for the
// other side a grid sample of each plane inside the ball at resolution h queried
// against all of S. Divided by the ball radius.
double measure_defect(const PointSample& s, const SplittingCertificate& cert);

// Builds a certificate from a direction and offsets, filling defect and diameter.
SplittingCertificate make_certificate(const PointSample& s, const Ball& ball, LinearSubspace direction,
                                      std::vector<Vector> offsets);

// Drops offsets whose plane misses S cap ball by more than defect * r.
SplittingCertificate reduce_splitting_set(const PointSample& s, const SplittingCertificate& cert);

double compare_directions(const SplittingCertificate& c1, const SplittingCertificate& c2);

// (direction distance, Hausdorff distance between the offset sets).
std::pair<double, double> uniqueness_gap(const PointSample& s, const Ball& ball,
                                         const SplittingCertificate& c1, const SplittingCertificate& c2);

struct BadScaleReport {
  std::vector<Ball> chain;
  std::vector<double> offset_diameters;
  std::vector<double> defects;
  std::vector<std::size_t> offset_counts;
  std::vector<std::size_t> bad_indices;
  std::size_t count = 0;
};

// Returns a sample of S valid inside the given window ball; its resolution sets
// the finest admissible radius (10 h) for that window.
using WindowSampler = std::function<PointSample(const Ball&)>;

BadScaleReport census_bad_scales(const PointSample& s, const std::vector<Ball>& chain, int k,
                                 int max_sheets, int m, const DetectOptions& options = {});

// Same census with a fresh sample per scale, for chains spanning more scales than
// one sample can resolve.
BadScaleReport census_bad_scales(const WindowSampler& sampler, const std::vector<Ball>& chain, int k,
                                 int max_sheets, int m, const DetectOptions& options = {});

// Radii r0 * 2^{-m i}, i = 0..depth; each next center is drawn from the sample
// points within r_i / 2 of the current one.
std::vector<Ball> descending_chain(const WindowSampler& sampler, const Vector& start, double r0, int m,
                                   int depth, std::uint64_t seed);
std::vector<Ball> descending_chain(const PointSample& s, const Vector& start, double r0, int m, int depth,
                                   std::uint64_t seed);

Json to_json(const SplittingCertificate& cert);
SplittingCertificate certificate_from_json(const Json& j);
Json to_json(const BadScaleReport& report);

double offset_set_diameter(const std::vector<Vector>& offsets);

}  // namespace reifsplit
