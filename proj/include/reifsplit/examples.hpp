#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reifsplit/io.hpp"
#include "reifsplit/point_sample.hpp"
#include "reifsplit/splitting.hpp"

namespace reifsplit {

enum class ExampleKind { MergingLines, Twist, CantorProduct, SingleGraph };

std::string to_string(ExampleKind kind);
ExampleKind example_kind_from_string(const std::string& name);

struct ExampleSpec {
  ExampleKind kind = ExampleKind::MergingLines;
  double delta = 0.01;
  double alpha_twist = 1.5 * M_PI;
  double h = 5e-4;
  // Ambient and graph dimension; fixed for every kind except single-graph.
  int n = 2;
  int k = 1;
  // single-graph only: the zero graph instead of the sinusoidal one.
  bool flat = false;
  // Restrict the sample to this window (intersected with B_2). Used to sample
  // tiny balls at a fine resolution without sampling all of B_2.
  std::optional<Ball> window;
};

// Throws InvalidArgumentError (bad delta/alpha/kind dimensions) or
// ResolutionError (h > delta / 10).
void validate(const ExampleSpec& spec);
ExampleSpec example_spec_from_json(const Json& j);
Json to_json(const ExampleSpec& spec);

// Exact splitting data of a generated example.
class GroundTruth {
 public:
  GroundTruth(ExampleSpec spec, PointSample sample);

  const ExampleSpec& spec() const { return spec_; }
  const PointSample& sample() const { return sample_; }
  int k() const { return spec_.k; }
  int n() const { return spec_.n; }
  // Advertised sheet bound N.
  int max_sheets() const;
  // Advertised defect bound, as a multiple of delta.
  double defect_multiple() const;

  // The set-valued graph map: heights over a base point (merging-lines, twist,
  // single-graph) or, for cantor-product, the abscissae of the truncated lines.
  std::vector<double> sheet_values(const Vector& base) const;

  LinearSubspace direction_at(const Ball& ball) const;
  std::vector<Vector> offsets_at(const Ball& ball) const;

  Json metadata() const;

 private:
  ExampleSpec spec_;
  PointSample sample_;
};

std::pair<PointSample, GroundTruth> generate(const ExampleSpec& spec);

SplittingCertificate ground_truth_splitting(const GroundTruth& gt, const Ball& ball);

// Samples S inside a 2r window around each requested ball with h = r / points_per_radius.
WindowSampler window_sampler(const ExampleSpec& base, double points_per_radius = 20.0);

// Merging-lines set-valued map f(x) (duplicates removed).
std::vector<double> merging_lines_values(double x, double delta);
// Twist map at (x1, x2).
std::vector<double> twist_values(double x1, double x2, double delta, double alpha);
// Midpoints of the segments of the delta-Cantor stage `level` (segment length
// delta^level, level >= 1) meeting [lo, hi].
std::vector<double> cantor_midpoints(double delta, int level, double lo, double hi);
// Stage whose segments are shorter than or equal to h.
int cantor_truncation_level(double delta, double h);

}  // namespace reifsplit
