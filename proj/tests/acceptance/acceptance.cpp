// Acceptance runner: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../common/oracle.hpp"
#include "reifsplit/examples.hpp"
#include "reifsplit/holder.hpp"
#include "reifsplit/io.hpp"
#include "reifsplit/linalg.hpp"
#include "reifsplit/map_builder.hpp"
#include "reifsplit/splitting.hpp"

using namespace reifsplit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Collects failed sub-checks of one criterion.
struct Verdict {
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

LinearSubspace random_subspace(std::mt19937_64& rng, int k, int n) {
  return LinearSubspace::from_spanning_rows(gaussian(rng, k, n));
}

PointSample cloud(std::mt19937_64& rng, int count, int n = 2) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(n, count);
  for (int j = 0; j < count; ++j)
    for (int d = 0; d < n; ++d) m(d, j) = u(rng);
  return PointSample(m, 0.01);
}

PointSample jitter(std::mt19937_64& rng, const PointSample& base, double scale, int extra) {
  std::normal_distribution<double> g(0.0, scale);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < base.size(); ++i) {
    Vector p = base.point(i);
    for (int d = 0; d < p.size(); ++d) p(d) += g(rng);
    pts.push_back(p);
  }
  for (int e = 0; e < extra; ++e) pts.push_back(vec2(u(rng), u(rng)));
  return PointSample::from_rows(pts, 0.01);
}

PointSample line(std::initializer_list<double> xs) {
  std::vector<Vector> pts;
  for (double x : xs) {
    Vector v(1);
    v << x;
    pts.push_back(v);
  }
  return PointSample::from_rows(pts, 0.01);
}

// ---------------------------------------------------------------------------
// Example fixtures, built on first use and shared across criteria.

struct Example {
  std::string name;
  ExampleSpec spec;
  PointSample sample;
  std::unique_ptr<GroundTruth> truth;
  std::unique_ptr<MapPyramid> pyramid;
  std::unique_ptr<FiberIndex> index;
  std::map<int, std::vector<RegularityRow>> regularity;

  int sheets() const { return truth->max_sheets(); }
  double h() const { return spec.h; }
  double delta() const { return spec.delta; }
};

ExampleSpec spec_for(ExampleKind kind) {
  ExampleSpec spec;
  spec.kind = kind;
  spec.delta = 0.01;
  spec.h = 5e-4;
  if (kind == ExampleKind::Twist) {
    // Surface samples at h = 5e-4 would need ~1e8 points; the twist runs at the
    // coarsest valid resolution of a larger delta.
    spec.n = 3;
    spec.k = 2;
    spec.delta = 0.1;
    spec.h = 0.01;
  }
  return spec;
}

class Examples {
 public:
  static constexpr int kIMax = 3;
  static constexpr double kAlpha = 0.1;

  Example& get(ExampleKind kind) {
    auto it = cache_.find(kind);
    if (it != cache_.end()) return *it->second;
    auto ex = std::make_unique<Example>();
    ex->name = to_string(kind);
    ex->spec = spec_for(kind);
    auto [s, gt] = generate(ex->spec);
    ex->sample = s;
    ex->truth = std::make_unique<GroundTruth>(gt);
    return *cache_.emplace(kind, std::move(ex)).first->second;
  }

  const MapPyramid& pyramid(ExampleKind kind) {
    Example& ex = get(kind);
    if (!ex.pyramid) {
      PyramidParams p;
      p.k = ex.spec.k;
      p.n = ex.spec.n;
      p.max_sheets = ex.sheets();
      p.m = 4;
      p.delta_nominal = ex.delta();
      p.alpha = kAlpha;
      p.i_max = kIMax;
      BuildOptions opts;
      opts.cover.allow_subresolution = true;
      ex.pyramid = std::make_unique<MapPyramid>(build_pyramid(ex.sample, p, opts));
    }
    return *ex.pyramid;
  }

  const FiberIndex& index(ExampleKind kind) {
    Example& ex = get(kind);
    if (!ex.index) ex.index = std::make_unique<FiberIndex>(pyramid(kind), ex.sample);
    return *ex.index;
  }

  const std::vector<RegularityRow>& regularity(ExampleKind kind, int stage);

 private:
  std::map<ExampleKind, std::unique_ptr<Example>> cache_;
};

const ExampleKind kAllKinds[] = {ExampleKind::MergingLines, ExampleKind::Twist, ExampleKind::CantorProduct,
                                 ExampleKind::SingleGraph};
const ExampleKind kPlanarKinds[] = {ExampleKind::MergingLines, ExampleKind::CantorProduct, ExampleKind::SingleGraph};

// Sample points of S in B_radius(0), each moved by a uniform offset in [-spread, spread]^n.
std::vector<Vector> probes_near(const PointSample& s, std::size_t count, double spread, std::uint64_t seed,
                                double radius = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> out;
  while (out.size() < count) {
    Vector p = s.point(pick(rng));
    if (p.norm() > radius) continue;
    for (int d = 0; d < p.size(); ++d) p(d) += spread * u(rng);
    out.push_back(p);
  }
  return out;
}

const std::vector<RegularityRow>& Examples::regularity(ExampleKind kind, int stage) {
  Example& ex = get(kind);
  auto it = ex.regularity.find(stage);
  if (it != ex.regularity.end()) return it->second;
  // Off the sample at the stage scale: at sub-resolution stages every sample point is a
  // cover center, where Phi_i is exactly affine.
  const double spread = 0.3 * pyramid(kind).radius(stage);
  const auto probes = probes_near(ex.sample, 200, spread, 700 + static_cast<std::uint64_t>(stage));
  return ex.regularity.emplace(stage, regularity_profile(pyramid(kind), stage, probes, ex.sample)).first->second;
}

std::vector<Ball> random_balls(const PointSample& s, std::size_t count, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(lo, hi);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  std::vector<Ball> out;
  while (out.size() < count) {
    const double r = ur(rng);
    const Vector c = s.point(pick(rng));
    if (c.norm() + r <= 1.99) out.emplace_back(c, r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Criteria.

Verdict metric_foundations() {
  Verdict v;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 40);
  double worst = -1e300;
  for (int t = 0; t < 1000; ++t) {
    const PointSample a = cloud(rng, size(rng)), b = cloud(rng, size(rng)), c = cloud(rng, size(rng));
    worst = std::max(worst, hausdorff_distance(a, c) - hausdorff_distance(a, b) - hausdorff_distance(b, c));
  }
  v.require(worst <= 1e-12, "Hausdorff triangle excess " + fmt(worst));

  // Three finite sets on the line, ball B_{1 - eps/2}(0) with eps = 0.1.
  const PointSample a = line({0, 0.9}), b = line({0, 1.0}), c = line({0, 1.1});
  const Ball ball(Vector::Zero(1), 0.95);
  const double ab = local_hausdorff(a, b, ball), bc = local_hausdorff(b, c, ball), ac = local_hausdorff(a, c, ball);
  v.require(std::abs(ab - 0.1) <= 1e-14 && bc == 0.0 && std::abs(ac - 0.2) <= 1e-14 && ab + bc < ac,
            "subadditivity counterexample gave " + fmt(ab) + " + " + fmt(bc) + " vs " + fmt(ac));
  v.note("counterexample " + fmt(ab) + " + " + fmt(bc) + " < " + fmt(ac));

  std::uniform_real_distribution<double> u(-0.5, 0.5), rad(0.4, 1.5), unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  int bad = 0;
  for (int t = 0; t < 500; ++t) {
    const PointSample p = cloud(rng, 25);
    const PointSample q = jitter(rng, p, 0.03, 2);
    const PointSample r = jitter(rng, q, 0.05, 2);
    const Ball bl(vec2(u(rng), u(rng)), rad(rng));
    const auto rp = restrict_to(p, bl), rq = restrict_to(q, bl);
    if (rp && rq && local_hausdorff(p, q, bl) > hausdorff_distance(*rp, *rq) + 1e-15) ++bad;
    const double shrink = 0.1 + 0.8 * unit(rng);
    const Vector dir = vec2(g(rng), g(rng)).normalized();
    const Ball inner(bl.center + (1.0 - shrink) * bl.radius * unit(rng) * dir, shrink * bl.radius);
    if (local_hausdorff(p, q, inner) > local_hausdorff(p, q, bl) + 1e-15) ++bad;
    double d1 = local_hausdorff(p, q, bl), d2 = local_hausdorff(q, r, bl);
    const PointSample* first = &p;
    const PointSample* last = &r;
    if (d1 > d2) {
      std::swap(d1, d2);
      std::swap(first, last);
    }
    if (bl.radius - d2 > 0.0 && local_hausdorff(*first, *last, Ball(bl.center, bl.radius - d2)) > d1 + d2 + 1e-12) ++bad;
  }
  v.require(bad == 0, std::to_string(bad) + " local-Hausdorff property violations");
  v.note("triangle excess " + fmt(worst) + ", 500 local configurations");
  return v;
}

Verdict grassmannian() {
  Verdict v;
  std::mt19937_64 rng(202);
  double sup_gap = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    const int k = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const LinearSubspace a = random_subspace(rng, k, n), b = random_subspace(rng, k, n);
    sup_gap = std::max(sup_gap, std::abs(subspace_distance(a, b) - subspace_distance_supform(a, b, 100000, t)));
  }
  v.require(sup_gap <= 2e-3, "sup form gap " + fmt(sup_gap));
  double comp_gap = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    const int k = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const LinearSubspace a = random_subspace(rng, k, n), b = random_subspace(rng, k, n);
    comp_gap = std::max(comp_gap, std::abs(subspace_distance(a, b) -
                                           subspace_distance(orthogonal_complement(a), orthogonal_complement(b))));
  }
  v.require(comp_gap <= 1e-10, "complement gap " + fmt(comp_gap));
  double tri = -1e300;
  for (int t = 0; t < 1000; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    const int k = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const LinearSubspace a = random_subspace(rng, k, n), b = random_subspace(rng, k, n), c = random_subspace(rng, k, n);
    tri = std::max(tri, subspace_distance(a, c) - subspace_distance(a, b) - subspace_distance(b, c));
  }
  v.require(tri <= 1e-12, "triangle excess " + fmt(tri));
  v.note("sup gap " + fmt(sup_gap) + ", complement gap " + fmt(comp_gap) + ", triangle excess " + fmt(tri));
  return v;
}

Verdict qr_criterion() {
  Verdict v;
  std::mt19937_64 rng(303);
  double recon = 0.0, ortho = 0.0, unique = 0.0;
  bool positive = true;
  for (int t = 0; t < 1000; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    const Matrix m = gaussian(rng, k, n);
    const QrFactors f = qr_decompose(m);
    recon = std::max(recon, (m - f.lower * f.frame).norm() / m.norm());
    ortho = std::max(ortho, (f.frame * f.frame.transpose() - Matrix::Identity(k, k)).norm());
    for (int i = 0; i < k; ++i) positive = positive && f.lower(i, i) > 0.0;
    positive = positive && f.lower.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0;
    const QrFactors g = qr_decompose(f.lower * f.frame);
    unique = std::max(unique, std::max((g.lower - f.lower).norm() / std::max(1.0, f.lower.norm()),
                                       (g.frame - f.frame).norm()));
  }
  v.require(recon <= 1e-10, "reconstruction " + fmt(recon));
  v.require(ortho <= 1e-10, "orthonormality " + fmt(ortho));
  v.require(unique <= 1e-10, "uniqueness " + fmt(unique));
  v.require(positive, "L not lower triangular with positive diagonal");
  double ratio = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    Matrix a = Matrix::Zero(k, n);
    a.leftCols(k) = Matrix::Identity(k, k);
    Matrix e = gaussian(rng, k, n);
    e *= 1e-3 / operator_norm(e);
    const auto gap = qr_perturbation_gap(a, a + e);
    ratio = std::max(ratio, std::max(gap.first, gap.second) / 1e-3);
  }
  v.require(ratio <= 50.0, "perturbation ratio " + fmt(ratio));
  v.note("reconstruction " + fmt(recon) + ", uniqueness " + fmt(unique) + ", max perturbation ratio " + fmt(ratio));
  return v;
}

Verdict oracle_equivalence(Examples& ex) {
  Verdict v;
  for (ExampleKind kind : kPlanarKinds) {
    Example& e = ex.get(kind);
    double worst_excess = -1e300, worst_angle = 0.0;
    int bad = 0;
    for (const Ball& b : random_balls(e.sample, 100, 0.05, 0.4, 404)) {
      const auto cert = detect_splitting(e.sample, b, 1, e.sheets());
      const auto opt = oracle::splitting_optimum(e.sample, b, e.sheets());
      const double excess = std::abs(cert.defect - opt.defect) - (2.0 * e.h() / b.radius + 0.1 * opt.defect);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 0.0) ++bad;
      if (kind == ExampleKind::MergingLines) {
        const auto gt = ground_truth_splitting(*e.truth, b);
        worst_angle = std::max(worst_angle, std::asin(std::min(1.0, subspace_distance(cert.direction, gt.direction))));
      }
    }
    v.require(bad == 0, e.name + ": " + std::to_string(bad) + " balls outside 2h/r + 10%");
    if (kind == ExampleKind::MergingLines) v.require(worst_angle <= 0.05, "merging-lines direction " + fmt(worst_angle) + " rad");
    v.note(e.name + " worst excess " + fmt(worst_excess) +
           (kind == ExampleKind::MergingLines ? ", max angle " + fmt(worst_angle) + " rad" : ""));
  }
  return v;
}

Verdict uniqueness_bounds(Examples& ex) {
  Verdict v;
  for (ExampleKind kind : kAllKinds) {
    Example& e = ex.get(kind);
    double dir_ratio = 0.0, off_ratio = 0.0;
    for (const Ball& b : random_balls(e.sample, 100, 0.05, 0.4, 505)) {
      const auto det = detect_splitting(e.sample, b, e.spec.k, e.sheets());
      const auto gt = ground_truth_splitting(*e.truth, b);
      const double eff = std::max(det.defect, gt.defect);
      const auto [dir, off] = uniqueness_gap(e.sample, b, det, gt);
      dir_ratio = std::max(dir_ratio, dir / (5.0 * eff));
      off_ratio = std::max(off_ratio, off / (7.0 * eff * b.radius));
    }
    v.require(dir_ratio <= 1.0 && off_ratio <= 1.0,
              e.name + ": gaps reach " + fmt(dir_ratio) + " / " + fmt(off_ratio) + " of the bounds");
    v.note(e.name + " " + fmt(dir_ratio) + " / " + fmt(off_ratio) + " of bounds");
  }
  return v;
}

Verdict census(Examples& ex) {
  Verdict v;
  const int m = 4, depth = 5;
  for (ExampleKind kind : kAllKinds) {
    Example& e = ex.get(kind);
    const int bound = kind == ExampleKind::SingleGraph ? 0 : e.sheets();
    const auto sampler = window_sampler(e.spec);
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<std::size_t> pick(0, e.sample.size() - 1);
    std::size_t worst = 0;
    int chains = 0;
    while (chains < 50) {
      const Vector start = e.sample.point(pick(rng));
      if (start.norm() > 1.45) continue;
      const auto chain = descending_chain(sampler, start, 0.5, m, depth, 6000 + static_cast<std::uint64_t>(chains));
      const auto report = census_bad_scales(sampler, chain, e.spec.k, e.sheets(), m);
      worst = std::max(worst, report.count);
      ++chains;
    }
    v.require(worst <= static_cast<std::size_t>(bound), e.name + ": " + std::to_string(worst) + " bad scales > " +
                                                            std::to_string(bound));
    v.note(e.name + " max " + std::to_string(worst) + " (bound " + std::to_string(bound) + ")");
  }
  return v;
}

// Relative finite-difference error of the Jacobian and Hessian of stage i at x.
std::pair<double, double> jet_errors(const MapPyramid& pyr, int i, const Vector& x) {
  const int n = pyr.params().n, k = pyr.params().k;
  const double r = pyr.radius(i);
  const double e = 1e-5 * r;
  const Jet2 jet = pyr.evaluate(i, x);
  double ej = 0.0, eh = 0.0;
  for (int d = 0; d < n; ++d) {
    Vector dx = Vector::Zero(n);
    dx(d) = e;
    const Jet2 p = pyr.evaluate(i, x + dx), q = pyr.evaluate(i, x - dx);
    const Vector fd = (p.value - q.value) / (2 * e);
    ej = std::max(ej, (fd - jet.jacobian.col(d)).norm() / std::max(1.0, jet.jacobian.norm()));
    for (int c = 0; c < k; ++c) {
      const Vector fdh = (p.jacobian.row(c) - q.jacobian.row(c)).transpose() / (2 * e);
      const Matrix& hc = jet.hessian[static_cast<std::size_t>(c)];
      eh = std::max(eh, (fdh - hc.col(d)).norm() / std::max(1.0 / r, hc.norm()));
    }
  }
  return {ej, eh};
}

Verdict construction_soundness(Examples& ex) {
  Verdict v;
  const double alpha = Examples::kAlpha;
  for (ExampleKind kind : kAllKinds) {
    Example& e = ex.get(kind);
    const MapPyramid& pyr = ex.pyramid(kind);
    const int n = pyr.params().n;
    double pou = 0.0, jac = 0.0, hes = 0.0, lbound = 0.0;
    std::size_t local_checked = 0, local_bad = 0, outside = 0;
    for (int i = 1; i <= pyr.built_stages(); ++i) {
      const CoverLevel& cover = pyr.stage(i).cover;
      const double r = cover.radius;
      for (const Vector& x : probes_near(e.sample, 200, 0.3 * r, 710 + static_cast<std::uint64_t>(i))) {
        const auto w = partition_weights(cover, x);
        if (w.empty()) {
          ++outside;
          continue;
        }
        double sum = 0.0;
        Vector g = Vector::Zero(n);
        Matrix hsum = Matrix::Zero(n, n);
        for (const auto& pw : w) {
          sum += pw.weight.value;
          g += pw.weight.grad;
          hsum += pw.weight.hess;
        }
        // Gradients and Hessians in units of r and r^2.
        pou = std::max({pou, std::abs(sum - 1.0), g.norm() * r, hsum.norm() * r * r});
      }
      std::vector<Vector> far = probes_near(e.sample, 600, 2.0 * r, 730 + static_cast<std::uint64_t>(i));
      std::mt19937_64 rng(740 + static_cast<std::uint64_t>(i));
      std::uniform_real_distribution<double> u(-1.9, 1.9);
      for (int t = 0; t < 600; ++t) {
        Vector x(n);
        for (int d = 0; d < n; ++d) x(d) = u(rng);
        if (x.norm() <= 1.9) far.push_back(x);
      }
      for (const Vector& x : far) {
        if (!cover.centers.indices_within(x, 0.24 * r).empty()) continue;
        const Jet2 a = pyr.evaluate(i, x), b = pyr.evaluate(i - 1, x);
        ++local_checked;
        bool same = (a.value.array() == b.value.array()).all() && (a.jacobian.array() == b.jacobian.array()).all();
        for (std::size_t c = 0; c < a.hessian.size(); ++c) same = same && (a.hessian[c].array() == b.hessian[c].array()).all();
        if (!same) ++local_bad;
      }
    }
    for (int i = 0; i <= pyr.built_stages(); ++i) {
      for (const Vector& x : probes_near(e.sample, 100, 0.3 * pyr.radius(i), 720 + static_cast<std::uint64_t>(i))) {
        const auto [ej, eh] = jet_errors(pyr, i, x);
        jac = std::max(jac, ej);
        hes = std::max(hes, eh);
      }
      const double bound = std::pow(pyr.radius(i), -alpha);
      if (i == 0) continue;  // L = I at stage 0
      for (const auto& row : ex.regularity(kind, i)) {
        lbound = std::max(lbound, std::max(row.lower_norm, row.lower_inv_norm) / bound);
      }
    }
    v.require(pou <= 1e-10, e.name + ": partition of unity " + fmt(pou));
    v.require(jac <= 1e-5 && hes <= 1e-5, e.name + ": jet errors " + fmt(jac) + " / " + fmt(hes));
    v.require(local_bad == 0 && local_checked > 0,
              e.name + ": locality " + std::to_string(local_bad) + " of " + std::to_string(local_checked));
    v.require(lbound <= 1.0, e.name + ": |L| reaches " + fmt(lbound) + " r^-alpha");
    v.note(e.name + " pou " + fmt(pou) + ", jets " + fmt(jac) + "/" + fmt(hes) + ", locality " +
           std::to_string(local_checked) + " pts, |L| " + fmt(lbound) + " r^-alpha");
  }
  return v;
}

Verdict decay_laws(Examples& ex) {
  Verdict v;
  const double alpha = Examples::kAlpha;
  for (ExampleKind kind : kAllKinds) {
    Example& e = ex.get(kind);
    const MapPyramid& pyr = ex.pyramid(kind);
    // Fitted on sample points; the constant off the sample is reported alongside.
    const auto probes = probes_near(e.sample, 1000, 0.0, 808);
    const auto off_sample = probes_near(e.sample, 1000, 0.02, 809);
    double c_half = 0.0, c_full = 0.0, c_off = 0.0;
    for (int i = 0; i < pyr.built_stages(); ++i) {
      const double scale = e.delta() * std::pow(pyr.radius(i + 1), 1.0 - alpha);
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const double c = (pyr.value(i + 1, probes[p]) - pyr.value(i, probes[p])).norm() / scale;
        c_full = std::max(c_full, c);
        if (p < probes.size() / 2) c_half = std::max(c_half, c);
        c_off = std::max(c_off, (pyr.value(i + 1, off_sample[p]) - pyr.value(i, off_sample[p])).norm() / scale);
      }
    }
    const bool decay_stable = c_full <= 1e-9 || c_full - c_half <= 0.2 * c_full;
    v.require(std::isfinite(c_full) && decay_stable,
              e.name + ": difference constant " + fmt(c_half) + " -> " + fmt(c_full) + " on doubling the probes");

    std::vector<double> per_stage;
    for (int i = 1; i <= pyr.built_stages(); ++i) {
      double c = 0.0;
      for (const auto& row : ex.regularity(kind, i)) c = std::max(c, row.regularity / e.delta());
      per_stage.push_back(c);
    }
    const double c_all = *std::max_element(per_stage.begin(), per_stage.end());
    const double c_coarse = *std::max_element(per_stage.begin(), per_stage.end() - 1);
    // Stable: adding the finest stage moves the fitted constant by less than 20%.
    const bool reg_stable = c_all <= 1e-9 || c_all - c_coarse <= 0.2 * c_all;
    std::string stages;
    for (double c : per_stage) stages += (stages.empty() ? "" : ",") + fmt(c);
    v.require(std::isfinite(c_all) && reg_stable, e.name + ": regularity constants per stage " + stages);
    v.note(e.name + " diff C " + fmt(c_full) + " (half " + fmt(c_half) + ", off sample " + fmt(c_off) +
           "), regularity C by stage " + stages);
  }
  return v;
}

Verdict main_theorem(Examples& ex) {
  Verdict v;
  for (ExampleKind kind : {ExampleKind::MergingLines, ExampleKind::Twist}) {
    Example& e = ex.get(kind);
    const FiberIndex& idx = ex.index(kind);
    const auto pairs = random_parameter_pairs(e.spec.k, 500, 909);
    const HolderReport rep = certify_biholder(idx, pairs, Examples::kAlpha);
    const CoverageReport cov = fiber_coverage(idx);
    std::size_t overlap = 0, separated = 0;
    for (const auto& p : rep.pairs) {
      if (p.separation <= 4.0 * e.h()) continue;
      ++separated;
      if (p.dist <= 0.0) ++overlap;
    }
    v.require(rep.pass, e.name + ": certification failed (C_upper " + fmt(rep.c_upper) + ", C_lower " +
                            fmt(rep.c_lower) + ", " + std::to_string(rep.violations.size()) + " violations)");
    v.require(std::isfinite(rep.c_upper) && std::isfinite(rep.c_lower) && rep.stable, e.name + ": constants not stable");
    v.require(rep.skipped == 0, e.name + ": " + std::to_string(rep.skipped) + " pairs with empty fibers");
    v.require(cov.complete(), e.name + ": coverage " + std::to_string(cov.exact) + "/" + std::to_string(cov.points));
    v.require(overlap == 0, e.name + ": " + std::to_string(overlap) + " overlapping fibers");
    v.note(e.name + " (delta " + fmt(e.delta()) + ", h " + fmt(e.h()) + ") C_upper " + fmt(rep.c_upper) + "/" +
           fmt(rep.c_upper_half) + ", C_lower " + fmt(rep.c_lower) + "/" + fmt(rep.c_lower_half) + ", coverage " +
           std::to_string(cov.exact) + "/" + std::to_string(cov.points) + ", disjoint " + std::to_string(separated));
  }
  return v;
}

// Independent recheck of |x0 xi| > 2 |x0 x_{i-1}| for 2 <= i <= l.
bool doubling_holds(const std::vector<Vector>& chain) {
  for (std::size_t i = 2; i < chain.size(); ++i) {
    if (!((chain[0] - chain[i]).norm() > 2.0 * (chain[0] - chain[i - 1]).norm())) return false;
  }
  return chain.size() >= 2;
}

Verdict cardinality(Examples& ex) {
  Verdict v;
  std::size_t chains_checked = 0, chains_bad = 0;
  for (ExampleKind kind : {ExampleKind::SingleGraph, ExampleKind::MergingLines, ExampleKind::Twist}) {
    Example& e = ex.get(kind);
    const FiberIndex& idx = ex.index(kind);
    std::mt19937_64 rng(1010);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vector> cs;
    while (cs.size() < 200) {
      Vector c(e.spec.k);
      for (int d = 0; d < e.spec.k; ++d) c(d) = g(rng);
      c *= std::pow(u(rng), 1.0 / e.spec.k) / c.norm();
      cs.push_back(c);
    }
    const std::size_t bound = kind == ExampleKind::SingleGraph ? 1 : 3;
    const CardinalityAudit audit = cardinality_audit(idx, cs, bound);
    for (const auto& [q, chain] : audit.witnesses) {
      if (!chain) continue;
      ++chains_checked;
      if (!doubling_holds(*chain)) ++chains_bad;
    }
    v.require(kind == ExampleKind::SingleGraph ? audit.max_size == 1 : audit.max_size <= bound,
              e.name + ": max fiber size " + std::to_string(audit.max_size));
    v.note(e.name + " max " + std::to_string(audit.max_size));
  }
  std::mt19937_64 rng(1011);
  std::size_t returned = 0;
  for (int t = 0; t < 200; ++t) {
    const PointSample pts = cloud(rng, 200);
    std::vector<Vector> rows;
    for (std::size_t i = 0; i < pts.size(); ++i) rows.push_back(pts.point(i));
    const auto chain = select_doubling_chain(rows, 3);
    if (!chain) continue;
    ++returned;
    ++chains_checked;
    if (chain->size() != 4 || !doubling_holds(*chain)) ++chains_bad;
  }
  v.require(chains_bad == 0, std::to_string(chains_bad) + " doubling chains fail the recheck");
  v.note(std::to_string(chains_checked) + " doubling chains rechecked (" + std::to_string(returned) + "/200 clouds)");
  return v;
}

int run_command(const std::string& cmd, const fs::path& log) {
  const int status = std::system((cmd + " >>" + log.string() + " 2>&1").c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    files[fs::relative(entry.path(), dir).string()] = os.str();
  }
  return files;
}

Verdict end_to_end(const std::string& cli, const fs::path& work) {
  Verdict v;
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 1; run <= 2; ++run) {
    const fs::path dir = work / ("pipeline_" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path log = work / ("pipeline_" + std::to_string(run) + ".log");
    fs::remove(log);
    const std::string out = " --output-dir " + dir.string() + " --seed 7";
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"generate", cli + " generate --kind merging-lines --delta 0.01 --h 0.0005" + out},
        {"detect", cli + " detect --balls 100" + out},
        {"build", cli + " build" + out},
        {"certify", cli + " certify" + out}};
    for (const auto& [name, cmd] : steps) {
      const int rc = run_command(cmd, log);
      v.require(rc == 0, "run " + std::to_string(run) + ": " + name + " exited " + std::to_string(rc));
      if (rc != 0) return v;
    }
    runs.push_back(read_tree(dir));
    if (run == 1) {
      const Json cert = read_json_file((dir / "certificates.json").string());
      const double max_defect = cert.at("summary").at("max_defect").get<double>();
      v.require(max_defect <= 0.03, "detect max defect " + fmt(max_defect));
      v.note("max detect defect " + fmt(max_defect));
    }
  }
  v.require(runs[0] == runs[1], "reruns differ");
  v.note(std::to_string(runs[0].size()) + " files byte-identical across reruns");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string cli;
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "Path of the reifsplit executable")->required();
  app.add_option("--work-dir", work, "Scratch directory for the end-to-end run");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  Examples examples;
  struct Criterion {
    int id;
    std::string name;
    double budget;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric foundations", 10, [] { return metric_foundations(); }},
      {2, "Grassmannian", 30, [] { return grassmannian(); }},
      {3, "QR", 10, [] { return qr_criterion(); }},
      {4, "splitting oracle equivalence", 120, [&] { return oracle_equivalence(examples); }},
      {5, "uniqueness bounds", 60, [&] { return uniqueness_bounds(examples); }},
      {6, "bad-scale census", 120, [&] { return census(examples); }},
      {7, "construction soundness", 300, [&] { return construction_soundness(examples); }},
      {8, "decay laws", 300, [&] { return decay_laws(examples); }},
      {9, "biHolder parametrization", 600, [&] { return main_theorem(examples); }},
      {10, "cardinality audit", 120, [&] { return cardinality(examples); }},
      {11, "end-to-end CLI", 900, [&] { return end_to_end(cli, fs::path(work)); }},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    if (elapsed > c.budget) v.failures.push_back("runtime " + fmt(elapsed) + " s over budget");
    const bool pass = v.failures.empty();
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ") " << fmt(elapsed, 3)
              << " s of " << c.budget << " s";
    for (const auto& s : v.notes) std::cout << "\n    " << s;
    for (const auto& s : v.failures) std::cout << "\n    failed: " << s;
    std::cout << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
