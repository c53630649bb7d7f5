#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reifsplit/io.hpp"
#include "reifsplit/map_builder.hpp"
#include "reifsplit/point_sample.hpp"

namespace reifsplit {

struct Fiber {
  Vector target;
  std::vector<std::size_t> members;  // sample indices
  std::vector<double> residuals;     // |Phi(x) - c|
  // Descent endpoints within the cluster radius of a member, merged into it.
  std::vector<std::vector<std::size_t>> collapsed;
  double tolerance = 0.0;

  // True when sample i is a member or was merged into one.
  bool contains(std::size_t i) const;

  bool empty() const { return members.empty(); }
  std::size_t size() const { return members.size(); }
};

struct FiberOptions {
  // The fiber tolerance is (1 + holder_constant * delta) (2h)^{1 - alpha}.
  double holder_constant = 1.0;
  // Members closer than cluster_factor * h collapse to one representative.
  double cluster_factor = 2.0;
  std::size_t descent_neighbors = 8;
  // A descent step x -> y must satisfy |pi_x (y - x)| >= cos(angle) |y - x|, where
  // pi_x projects onto the row space of grad Phi(x). This keeps the descent from
  // hopping across stacked sheets.
  double descent_max_angle = 0.7853981633974483;
};

// Phi evaluated once on every sample point, with a spatial index on the values.
class FiberIndex {
 public:
  FiberIndex(const MapPyramid& pyramid, const PointSample& s, const FiberOptions& options = {});

  const MapPyramid& pyramid() const { return pyramid_; }
  const PointSample& sample() const { return sample_; }
  const Matrix& values() const { return values_.points(); }  // k x N
  double tolerance() const { return tolerance_; }

  Fiber fiber(const Vector& c) const;
  Matrix member_points(const Fiber& f) const;

 private:
  MapPyramid pyramid_;
  PointSample sample_;
  PointSample values_;
  // Row-space frames of grad Phi at each sample, k*n rows stacked per column.
  Matrix frames_;
  FiberOptions options_;
  double tolerance_ = 0.0;
};

Fiber fiber(const MapPyramid& pyramid, const PointSample& s, const Vector& c, const FiberOptions& options = {});

struct PairRecord {
  Vector c, d;
  double separation = 0.0;  // |c - d|
  double hausdorff = 0.0;   // d_H(iota(c), iota(d))
  double dist = 0.0;        // dist(iota(c), iota(d))
  double slack = 0.0;       // sampling slack used on both sides
  double c_upper = 0.0;     // smallest constant making the upper bound hold for this pair
  double c_lower = 0.0;
};

struct HolderReport {
  double alpha = 0.0;
  double delta_nominal = 0.0;
  std::vector<PairRecord> pairs;
  std::size_t skipped = 0;
  double c_lower = 0.0;
  double c_upper = 0.0;
  double c_lower_half = 0.0;  // fitted on the first half of the pairs
  double c_upper_half = 0.0;
  bool stable = false;
  double constant_ceiling = 100.0;
  std::vector<std::pair<std::size_t, std::string>> violations;
  bool pass = false;
};

struct CertifyOptions {
  double constant_ceiling = 100.0;
  double stability_tolerance = 0.2;
  // Pairs with |c - d| above this factor times h must have disjoint fibers.
  double disjoint_factor = 4.0;
};

HolderReport certify_biholder(const FiberIndex& index, const std::vector<std::pair<Vector, Vector>>& pairs,
                              double alpha, const CertifyOptions& options = {});

// Pairs (c, d) in B_radius(0^k) with |c - d| <= max_separation.
std::vector<std::pair<Vector, Vector>> random_parameter_pairs(int k, std::size_t count, std::uint64_t seed,
                                                              double radius = 1.0, double max_separation = 1.0);

// Pairs of sample points in B_radius(0) at log-uniform separations up to max_separation.
std::vector<std::pair<Vector, Vector>> random_sample_pairs(const PointSample& s, std::size_t count, std::uint64_t seed,
                                                           double radius = 1.0, double max_separation = 1.0);

struct CoverageReport {
  std::size_t points = 0;      // sample points in B_1
  std::size_t exact = 0;       // x is a member of fiber(Phi(x)) or merged into one
  std::size_t representative = 0;  // x is itself a member
  std::size_t near = 0;        // x within 2h of a member
  bool complete() const { return exact == points; }
};

CoverageReport fiber_coverage(const FiberIndex& index, double radius = 1.0);

// |Phi(x) - Phi(y)| <= (1 + C delta) |x - y|^{1-alpha}; fitted C on all pairs and on the first half.
struct ContinuityReport {
  std::size_t pairs = 0;
  double c_fit = 0.0;
  double c_fit_half = 0.0;
  double max_ratio = 0.0;
  bool stable = false;
};

ContinuityReport holder_continuity(const MapPyramid& pyramid, const std::vector<std::pair<Vector, Vector>>& pairs,
                                   double alpha, double delta, double stability_tolerance = 0.2);

struct LevelSetOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  double step_fraction = 0.1;    // tangential step over r_i
  double domain_radius = 1.9;
  std::size_t max_points = 200000;
};

struct LevelSetResult {
  PointSample points;
  std::size_t dropped = 0;
  double max_residual = 0.0;
};

// One Gauss-Newton refinement onto Phi_i = c. Returns nullopt on divergence.
std::optional<Vector> gauss_newton(const MapPyramid& pyramid, int i, const Vector& c, const Vector& seed,
                                   const LevelSetOptions& options = {}, double* residual = nullptr);

LevelSetResult level_set_points(const MapPyramid& pyramid, int i, const Vector& c, const std::vector<Vector>& seeds,
                                const LevelSetOptions& options = {});

// d_H(Phi^-1(c), Phi^-1(d)) <= (1 + C delta) |c - d|^{1/(1+alpha)} on level sets of
// the top stage traced from the rotated seeds R^T (c, 0), compared inside B_window(0).
// Reported in the ContinuityReport layout: c_fit is the fitted C.
ContinuityReport level_set_sandwich(const MapPyramid& pyramid, const std::vector<std::pair<Vector, Vector>>& pairs,
                                    const LevelSetOptions& options = {}, double window = 1.0,
                                    double stability_tolerance = 0.2);

struct ChainResult {
  std::vector<Vector> path;
  std::vector<double> steps;  // |x_i - x_{i-1}|
  bool diverged = false;
};

ChainResult projection_chain(const MapPyramid& pyramid, const Vector& c, const Vector& x0, int depth,
                             const LevelSetOptions& options = {});

// Least-squares affine `dim`-plane through the points in the ball: sup residual / r
// and the largest secant slope |normal part| / |tangent part| over point pairs.
std::pair<double, double> verify_graphical(const PointSample& levelset, const Ball& ball, int dim);

// N(l, n) of the doubling lemma, saturating at SIZE_MAX.
std::size_t doubling_cardinality(int l, int n);

bool is_doubling_chain(const std::vector<Vector>& chain);

// x_0..x_l with |x_0 x_i| > 2 |x_0 x_{i-1}| for 2 <= i <= l, or nullopt.
std::optional<std::vector<Vector>> select_doubling_chain(const std::vector<Vector>& points, int l);

struct CardinalityAudit {
  std::size_t max_size = 0;
  std::vector<std::size_t> sizes;
  std::size_t threshold = 0;
  // For each fiber over the threshold: its index in the query list and the chain, if found.
  std::vector<std::pair<std::size_t, std::optional<std::vector<Vector>>>> witnesses;
};

CardinalityAudit cardinality_audit(const FiberIndex& index, const std::vector<Vector>& cs, std::size_t n_prime);

Json to_json(const HolderReport& report);
Json to_json(const ContinuityReport& report);
Json to_json(const CardinalityAudit& audit);
Json to_json(const CoverageReport& report);

// Rows: c0..c{k-1}, x0..x{n-1}, residual.
void write_fibers_csv(const FiberIndex& index, const std::vector<Fiber>& fibers, const std::string& path);

}  // namespace reifsplit
