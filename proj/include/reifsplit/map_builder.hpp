#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "reifsplit/io.hpp"
#include "reifsplit/linalg.hpp"
#include "reifsplit/point_sample.hpp"
#include "reifsplit/splitting.hpp"

namespace reifsplit {

// Cutoff profile: 1 on [0, 0.4), quintic smoothstep down to 0 on [0.4, 0.48],
// 0 beyond. C^2 with closed-form derivatives.
struct BumpProfile {
  static constexpr double kPlateau = 0.4;
  static constexpr double kSupport = 0.48;
  static constexpr double kWidth = kSupport - kPlateau;
  // sup |phi'| = 30/16 / 0.08 and sup |phi''| = (10 / sqrt 3) / 0.08^2.
  static constexpr double kMaxFirst = 1.875 / kWidth;
  static constexpr double kMaxSecond = 5.773502691896258 / (kWidth * kWidth);

  static double value(double t);
  static double first(double t);
  static double second(double t);
};

// Value, gradient and Hessian of a scalar function on R^n.
struct ScalarJet {
  double value = 0.0;
  Vector grad;
  Matrix hess;

  static ScalarJet constant(double v, int n);
};

// phi(|x - center| / radius) with exact derivatives.
ScalarJet bump_jet(const Vector& x, const Vector& center, double radius);

enum class JetOrder { Value = 0, Jacobian = 1, Hessian = 2 };

// Phi_i(x) in R^k with its Jacobian (k x n) and Hessian (k slices of n x n).
// Lower-order requests leave the higher fields empty.
struct Jet2 {
  Vector value;
  Matrix jacobian;
  std::vector<Matrix> hessian;
};

struct CoverLevel {
  int index = 0;
  double radius = 1.0;
  // Radius of the certificate balls: the scale radius, or the resolution floor
  // 10h when sub-resolution stages are allowed.
  double certificate_radius = 1.0;
  PointSample centers;
  std::vector<std::size_t> center_sample_index;
  std::vector<std::size_t> certificate_of_center;
  std::vector<SplittingCertificate> certificates;

  std::size_t size() const { return center_sample_index.size(); }
  const SplittingCertificate& certificate(std::size_t a) const { return certificates[certificate_of_center[a]]; }
};

struct CoverOptions {
  double cover_fraction = 0.01;  // cover radius over r_i
  double domain_radius = 1.99;   // centers are drawn from S cap B_{domain_radius}(0)
  // Centers reuse the certificate of a net point within this fraction of the
  // certificate radius. 0 computes one certificate per center.
  double certificate_share = 0.25;
  bool allow_subresolution = false;
  DetectOptions detect{4, false, 0, 2000};
};

// Certificates already computed, keyed by (sample index, certificate radius).
using CertificateCache = std::map<std::pair<std::size_t, double>, SplittingCertificate>;

CoverLevel build_cover(const PointSample& s, int i, int m, int k, int max_sheets,
                       const CoverOptions& options = {}, CertificateCache* cache = nullptr);
CoverLevel build_cover_at_radius(const PointSample& s, int index, double radius, int k, int max_sheets,
                                 const CoverOptions& options = {}, CertificateCache* cache = nullptr);

struct PartitionWeight {
  std::size_t center = 0;
  ScalarJet weight;
};

// psi_a = phi_a / sum phi at scale r_i; empty when x lies outside every bump support.
std::vector<PartitionWeight> partition_weights(const CoverLevel& cover, const Vector& x);

// sum phi'_a / (sum phi'_a + prod (1 - phi'_a)), phi'_a at radius r_i / 2.
ScalarJet glue_weight(const CoverLevel& cover, const Vector& x);

struct StageData {
  CoverLevel cover;
  Matrix anchors;             // k x A: Phi_{i-1}(x_a)
  std::vector<Matrix> maps;   // A matrices k x n: grad Phi_{i-1}(x_a) P_a
};

struct PyramidParams {
  int k = 1;
  int n = 2;
  int max_sheets = 1;
  int m = 4;
  double delta_nominal = 0.01;
  double alpha = 0.1;
  int i_max = 1;
  double h = 0.0;
};

class MapPyramid {
 public:
  MapPyramid() = default;
  MapPyramid(PyramidParams params, Matrix rotation);

  const PyramidParams& params() const { return params_; }
  const Matrix& rotation() const { return rotation_; }
  int built_stages() const { return static_cast<int>(stages_.size()); }
  double radius(int i) const;
  const StageData& stage(int i) const { return *stages_.at(static_cast<std::size_t>(i - 1)); }

  Jet2 evaluate(int i, const Vector& x, JetOrder order = JetOrder::Hessian) const;
  Vector value(int i, const Vector& x) const { return evaluate(i, x, JetOrder::Value).value; }
  // Phi at the top built stage.
  Vector value(const Vector& x) const { return value(built_stages(), x); }

  MapPyramid with_stage(std::shared_ptr<const StageData> stage) const;

 private:
  PyramidParams params_;
  Matrix rotation_;
  std::vector<std::shared_ptr<const StageData>> stages_;
};

struct BuildOptions {
  CoverOptions cover;
  DetectOptions top_detect;
};

// Stage 0: detects the splitting direction of S in B_2(0) and rotates it onto
// R^k x {0}.
MapPyramid initialize_pyramid(const PointSample& s, const PyramidParams& params, const BuildOptions& options = {});

MapPyramid build_stage(const MapPyramid& pyramid, const PointSample& s, const BuildOptions& options = {},
                       CertificateCache* cache = nullptr);

// initialize_pyramid followed by i_max stages.
MapPyramid build_pyramid(const PointSample& s, const PyramidParams& params, const BuildOptions& options = {});

// Largest i with 2^{-m i} >= 10 h.
int max_resolved_stage(int m, double h);

struct RegularityRow {
  Vector probe;
  double regularity = 0.0;     // |L^-1 grad^2 Phi_i| r_i
  double lower_norm = 0.0;     // |L|_op
  double lower_inv_norm = 0.0; // |L^-1|_op
  std::optional<double> kernel_gap;  // d((ker grad Phi_i)^perp, splitting direction)
};

std::vector<RegularityRow> regularity_profile(const MapPyramid& pyramid, int i, const std::vector<Vector>& probes,
                                              const PointSample& s, const DetectOptions& detect = {});

Json to_json(const MapPyramid& pyramid);
MapPyramid pyramid_from_json(const Json& j);

}  // namespace reifsplit
