#include "reifsplit/examples.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "reifsplit/error.hpp"

namespace reifsplit {

std::string to_string(ExampleKind kind) {
  switch (kind) {
    case ExampleKind::MergingLines: return "merging-lines";
    case ExampleKind::Twist: return "twist";
    case ExampleKind::CantorProduct: return "cantor-product";
    case ExampleKind::SingleGraph: return "single-graph";
  }
  return "unknown";
}

ExampleKind example_kind_from_string(const std::string& name) {
  for (auto k : {ExampleKind::MergingLines, ExampleKind::Twist, ExampleKind::CantorProduct,
                 ExampleKind::SingleGraph}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgumentError("unknown example kind '" + name + "'");
}

void validate(const ExampleSpec& spec) {
  if (!(spec.delta > 0.0 && spec.delta <= 0.1)) throw InvalidArgumentError("delta must lie in (0, 0.1]");
  if (!(spec.h > 0.0)) throw InvalidArgumentError("h must be positive");
  if (spec.h > spec.delta / 10.0 * (1.0 + 1e-12)) {
    throw ResolutionError("resolution too coarse: h must be at most delta / 10");
  }
  switch (spec.kind) {
    case ExampleKind::MergingLines:
    case ExampleKind::CantorProduct:
      if (spec.n != 2 || spec.k != 1) throw InvalidArgumentError(to_string(spec.kind) + " lives in R^2 with k = 1");
      break;
    case ExampleKind::Twist:
      if (spec.n != 3 || spec.k != 2) throw InvalidArgumentError("twist lives in R^3 with k = 2");
      if (!(spec.alpha_twist > M_PI && spec.alpha_twist <= 2.0 * M_PI)) {
        throw InvalidArgumentError("alpha_twist must lie in (pi, 2 pi]");
      }
      break;
    case ExampleKind::SingleGraph:
      if (spec.k < 1 || spec.k >= spec.n) throw InvalidArgumentError("single-graph needs 1 <= k < n");
      break;
  }
}

ExampleSpec example_spec_from_json(const Json& j) {
  ExampleSpec spec;
  spec.kind = example_kind_from_string(j.at("kind").get<std::string>());
  spec.delta = j.at("delta").get<double>();
  spec.h = j.at("h").get<double>();
  if (spec.kind == ExampleKind::Twist) {
    spec.n = 3;
    spec.k = 2;
  }
  spec.alpha_twist = j.value("alpha_twist", spec.alpha_twist);
  spec.n = j.value("n", spec.n);
  spec.k = j.value("k", spec.k);
  spec.flat = j.value("flat", false);
  validate(spec);
  return spec;
}

Json to_json(const ExampleSpec& spec) {
  Json j{{"kind", to_string(spec.kind)}, {"delta", spec.delta}, {"h", spec.h}, {"n", spec.n}, {"k", spec.k}};
  if (spec.kind == ExampleKind::Twist) j["alpha_twist"] = spec.alpha_twist;
  if (spec.kind == ExampleKind::SingleGraph) j["flat"] = spec.flat;
  return j;
}

namespace {

void collapse(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) <= 1e-15; }), v.end());
}

double graph_phase(const Vector& u) { return 3.0 * u.sum() / std::sqrt(static_cast<double>(u.size())); }

std::vector<double> single_graph_values(const ExampleSpec& spec, const Vector& u) {
  std::vector<double> out;
  for (int j = 0; j < spec.n - spec.k; ++j) {
    out.push_back(spec.flat ? 0.0 : spec.delta * std::sin(graph_phase(u) + j) / 3.0);
  }
  return out;
}

// Lattice indices j with j * step in [lo, hi].
std::pair<long, long> lattice_range(double lo, double hi, double step) {
  return {static_cast<long>(std::ceil(lo / step - 1e-9)), static_cast<long>(std::floor(hi / step + 1e-9))};
}

struct Region {
  Vector lo, hi;
  std::optional<Ball> window;
  bool keep(const Vector& p) const {
    if (p.norm() > 2.0) return false;
    return !window || (p - window->center).norm() <= window->radius;
  }
};

Region region_of(const ExampleSpec& spec) {
  Region r{Vector::Constant(spec.n, -2.0), Vector::Constant(spec.n, 2.0), spec.window};
  if (spec.window) {
    if (spec.window->dim() != spec.n) throw DimensionMismatchError("window dimension mismatch");
    for (int c = 0; c < spec.n; ++c) {
      r.lo(c) = std::max(r.lo(c), spec.window->center(c) - spec.window->radius);
      r.hi(c) = std::min(r.hi(c), spec.window->center(c) + spec.window->radius);
    }
  }
  return r;
}

}  // namespace

std::vector<double> merging_lines_values(double x, double delta) {
  if (x <= 0.0) return {0.0};
  int e = static_cast<int>(std::ceil(std::log2(x)));
  // Fix rounding so that 2^(e-1) < x <= 2^e.
  while (std::ldexp(1.0, e) < x) ++e;
  while (std::ldexp(1.0, e - 1) >= x) --e;
  std::vector<double> v{0.0, delta * (std::ldexp(1.0, e) - x), delta * x};
  collapse(v);
  return v;
}

std::vector<double> twist_values(double x1, double x2, double delta, double alpha) {
  const double r = std::hypot(x1, x2);
  if (r == 0.0) return {0.0};
  double theta = std::atan2(x2, x1);
  if (theta < 0.0) theta += 2.0 * M_PI;
  if (theta >= 2.0 * M_PI) theta = 0.0;
  std::vector<double> v{-r * delta, r * delta};
  if (theta < alpha) v.push_back(r * delta * (2.0 * theta / alpha - 1.0));
  collapse(v);
  return v;
}

int cantor_truncation_level(double delta, double h) {
  int level = std::max(1, static_cast<int>(std::ceil(std::log(h) / std::log(delta))));
  while (std::pow(delta, level) > h) ++level;
  return level;
}

std::vector<double> cantor_midpoints(double delta, int level, double lo, double hi) {
  std::vector<double> out;
  std::function<void(int, double)> walk = [&](int i, double a) {
    const double len = std::pow(delta, i);
    if (a > hi || a + len < lo) return;
    if (i == level) {
      out.push_back(a + 0.5 * len);
      return;
    }
    const double child = std::pow(delta, i + 1);
    walk(i + 1, a);
    walk(i + 1, a + len - child);
  };
  walk(1, 0.0);
  return out;
}

std::pair<PointSample, GroundTruth> generate(const ExampleSpec& spec) {
  validate(spec);
  const Region region = region_of(spec);
  std::vector<double> coords;
  auto emit = [&](const Vector& p) {
    if (!region.keep(p)) return;
    coords.insert(coords.end(), p.data(), p.data() + p.size());
  };

  const double h = spec.h;
  switch (spec.kind) {
    case ExampleKind::MergingLines: {
      const double step = 0.5 * h;
      auto [a, b] = lattice_range(region.lo(0), region.hi(0), step);
      for (long j = a; j <= b; ++j) {
        const double x = j * step;
        for (double y : merging_lines_values(x, spec.delta)) emit(Vector{{x, y}});
      }
      break;
    }
    case ExampleKind::Twist: {
      const double step = 1.3 * h;
      auto [a0, b0] = lattice_range(region.lo(0), region.hi(0), step);
      auto [a1, b1] = lattice_range(region.lo(1), region.hi(1), step);
      for (long i = a0; i <= b0; ++i) {
        for (long j = a1; j <= b1; ++j) {
          const double x1 = i * step, x2 = j * step;
          if (x1 * x1 + x2 * x2 > 4.0) continue;
          for (double z : twist_values(x1, x2, spec.delta, spec.alpha_twist)) emit(Vector{{x1, x2, z}});
        }
      }
      break;
    }
    case ExampleKind::CantorProduct: {
      const int level = cantor_truncation_level(spec.delta, h);
      const double step = 0.5 * h;
      auto [a, b] = lattice_range(region.lo(1), region.hi(1), step);
      for (double c : cantor_midpoints(spec.delta, level, region.lo(0), region.hi(0))) {
        for (long j = a; j <= b; ++j) emit(Vector{{c, j * step}});
      }
      break;
    }
    case ExampleKind::SingleGraph: {
      const int k = spec.k;
      const double step = k == 1 ? 0.5 * h : 1.8 * h / std::sqrt(static_cast<double>(k));
      std::vector<std::pair<long, long>> ranges;
      for (int c = 0; c < k; ++c) ranges.push_back(lattice_range(region.lo(c), region.hi(c), step));
      std::vector<long> idx;
      for (auto& r : ranges) {
        if (r.first > r.second) goto done;
        idx.push_back(r.first);
      }
      while (true) {
        Vector u(k);
        for (int c = 0; c < k; ++c) u(c) = idx[static_cast<std::size_t>(c)] * step;
        if (u.norm() <= 2.0) {
          Vector p(spec.n);
          p.head(k) = u;
          const auto g = single_graph_values(spec, u);
          for (int j = 0; j < spec.n - k; ++j) p(k + j) = g[static_cast<std::size_t>(j)];
          emit(p);
        }
        int c = 0;
        while (c < k && ++idx[static_cast<std::size_t>(c)] > ranges[static_cast<std::size_t>(c)].second) {
          idx[static_cast<std::size_t>(c)] = ranges[static_cast<std::size_t>(c)].first;
          ++c;
        }
        if (c == k) break;
      }
    done:
      break;
    }
  }
  if (coords.empty()) throw EmptySetError("generate: the window contains no point of S");
  Matrix m = Eigen::Map<Matrix>(coords.data(), spec.n, static_cast<Eigen::Index>(coords.size() / spec.n));
  PointSample sample(std::move(m), h);
  return {sample, GroundTruth(spec, sample)};
}

GroundTruth::GroundTruth(ExampleSpec spec, PointSample sample) : spec_(std::move(spec)), sample_(std::move(sample)) {}

int GroundTruth::max_sheets() const {
  switch (spec_.kind) {
    case ExampleKind::MergingLines: return 3;
    case ExampleKind::Twist: return 3;
    case ExampleKind::CantorProduct: return 2;
    case ExampleKind::SingleGraph: return 1;
  }
  return 1;
}

double GroundTruth::defect_multiple() const {
  switch (spec_.kind) {
    case ExampleKind::MergingLines: return 1.0;
    case ExampleKind::Twist: return 4.0;
    case ExampleKind::CantorProduct: return 2.0;
    case ExampleKind::SingleGraph: return 2.0;
  }
  return 1.0;
}

std::vector<double> GroundTruth::sheet_values(const Vector& base) const {
  switch (spec_.kind) {
    case ExampleKind::MergingLines: return merging_lines_values(base(0), spec_.delta);
    case ExampleKind::Twist: return twist_values(base(0), base(1), spec_.delta, spec_.alpha_twist);
    case ExampleKind::CantorProduct: {
      const int level = cantor_truncation_level(spec_.delta, spec_.h);
      return cantor_midpoints(spec_.delta, level, -10.0, 10.0);
    }
    case ExampleKind::SingleGraph: return single_graph_values(spec_, base.head(spec_.k));
  }
  return {};
}

LinearSubspace GroundTruth::direction_at(const Ball& ball) const {
  switch (spec_.kind) {
    case ExampleKind::MergingLines: return LinearSubspace::coordinate(1, 2);
    case ExampleKind::Twist: return LinearSubspace::coordinate(2, 3);
    case ExampleKind::CantorProduct: return LinearSubspace::from_frame(Matrix{{0.0, 1.0}});
    case ExampleKind::SingleGraph: {
      const int k = spec_.k;
      Matrix rows = Matrix::Zero(k, spec_.n);
      const Vector u = ball.center.head(k);
      const double phase = graph_phase(u);
      const double dphase = 3.0 / std::sqrt(static_cast<double>(k));
      for (int i = 0; i < k; ++i) {
        rows(i, i) = 1.0;
        for (int j = 0; j < spec_.n - k; ++j) {
          rows(i, k + j) = spec_.flat ? 0.0 : spec_.delta * std::cos(phase + j) * dphase / 3.0;
        }
      }
      return LinearSubspace::from_spanning_rows(rows);
    }
  }
  throw InvalidArgumentError("unknown example kind");
}

std::vector<Vector> GroundTruth::offsets_at(const Ball& ball) const {
  const Vector& x = ball.center;
  std::vector<Vector> out;
  switch (spec_.kind) {
    case ExampleKind::MergingLines:
      for (double y : merging_lines_values(x(0), spec_.delta)) out.push_back(Vector{{x(0), y}});
      break;
    case ExampleKind::Twist:
      for (double z : twist_values(x(0), x(1), spec_.delta, spec_.alpha_twist)) out.push_back(Vector{{x(0), x(1), z}});
      break;
    case ExampleKind::CantorProduct: {
      const double d = spec_.delta;
      const double r = ball.radius;
      // Scale class i with d^{i-1}/4 >= r > d^i/4; offsets come from stage i + 1.
      int i = static_cast<int>(std::floor(std::log(4.0 * r) / std::log(d))) + 1;
      while (std::pow(d, i) / 4.0 >= r) ++i;
      while (i > 0 && std::pow(d, i - 1) / 4.0 < r) --i;
      const int level = std::clamp(i + 1, 1, cantor_truncation_level(d, spec_.h));
      auto mids = cantor_midpoints(d, level, x(0) - r, x(0) + r);
      if (mids.empty()) {
        auto all = cantor_midpoints(d, level, -10.0, 10.0);
        double best = all.front();
        for (double c : all) {
          if (std::abs(c - x(0)) < std::abs(best - x(0))) best = c;
        }
        mids.push_back(best);
      }
      for (double c : mids) out.push_back(Vector{{c, x(1)}});
      break;
    }
    case ExampleKind::SingleGraph: {
      Vector p(spec_.n);
      p.head(spec_.k) = x.head(spec_.k);
      const auto g = single_graph_values(spec_, x.head(spec_.k));
      for (int j = 0; j < spec_.n - spec_.k; ++j) p(spec_.k + j) = g[static_cast<std::size_t>(j)];
      const Matrix f = direction_at(ball).frame();
      out.push_back(p - f.transpose() * (f * (p - x)));
      break;
    }
  }
  return out;
}

Json GroundTruth::metadata() const {
  return Json{{"spec", to_json(spec_)},
              {"max_sheets", max_sheets()},
              {"defect_multiple", defect_multiple()},
              {"points", sample_.size()}};
}

SplittingCertificate ground_truth_splitting(const GroundTruth& gt, const Ball& ball) {
  // Sheets passing the ball at a distance are dropped, as for detected certificates.
  const auto cert = make_certificate(gt.sample(), ball, gt.direction_at(ball), gt.offsets_at(ball));
  try {
    return reduce_splitting_set(gt.sample(), cert);
  } catch (const InconsistentCertificateError&) {
    return cert;
  }
}

WindowSampler window_sampler(const ExampleSpec& base, double points_per_radius) {
  return [base, points_per_radius](const Ball& ball) {
    ExampleSpec spec = base;
    spec.window = Ball(ball.center, 2.0 * ball.radius);
    spec.h = std::min(base.h, ball.radius / points_per_radius);
    return generate(spec).first;
  };
}

}  // namespace reifsplit
