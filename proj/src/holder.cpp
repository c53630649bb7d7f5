#include "reifsplit/holder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "reifsplit/error.hpp"
#include "reifsplit/linalg.hpp"

namespace reifsplit {

namespace {

double max_or_zero(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

Vector random_in_ball(std::mt19937_64& rng, int k, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector g(k);
  for (int j = 0; j < k; ++j) g(j) = normal(rng);
  while (g.norm() == 0.0) {
    for (int j = 0; j < k; ++j) g(j) = normal(rng);
  }
  const double scale = radius * std::pow(unit(rng), 1.0 / k);
  return g.normalized() * scale;
}

double finite_set_hausdorff(const Matrix& a, const Matrix& b) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.cols(); ++j) best = std::min(best, (a.col(i) - b.col(j)).norm());
    h = std::max(h, best);
  }
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.cols(); ++i) best = std::min(best, (a.col(i) - b.col(j)).norm());
    h = std::max(h, best);
  }
  return h;
}

double finite_set_distance(const Matrix& a, const Matrix& b) {
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) d = std::min(d, (a.col(i) - b.col(j)).norm());
  return d;
}

// Grid hash over cells of a fixed side, used to reject near-duplicate points.
class CellHash {
 public:
  CellHash(int n, double side) : n_(n), side_(side) {}

  bool has_point_within(const Vector& x, double radius) const {
    const std::vector<long long> base = cell(x);
    std::vector<long long> probe(base.size());
    const long long span = static_cast<long long>(std::ceil(radius / side_));
    std::vector<long long> offset(static_cast<std::size_t>(n_), -span);
    while (true) {
      for (int j = 0; j < n_; ++j) probe[j] = base[j] + offset[j];
      auto it = cells_.find(key(probe));
      if (it != cells_.end()) {
        for (const Vector& y : it->second)
          if ((y - x).norm() <= radius) return true;
      }
      int j = 0;
      while (j < n_ && offset[j] == span) offset[j++] = -span;
      if (j == n_) break;
      ++offset[j];
    }
    return false;
  }

  void insert(const Vector& x) { cells_[key(cell(x))].push_back(x); }

 private:
  std::vector<long long> cell(const Vector& x) const {
    std::vector<long long> c(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) c[j] = static_cast<long long>(std::floor(x(j) / side_));
    return c;
  }

  static std::size_t key(const std::vector<long long>& c) {
    std::size_t h = 1469598103934665603ull;
    for (long long v : c) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }

  int n_;
  double side_;
  std::unordered_map<std::size_t, std::vector<Vector>> cells_;
};

}  // namespace

bool Fiber::contains(std::size_t i) const {
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (members[j] == i) return true;
    if (std::find(collapsed[j].begin(), collapsed[j].end(), i) != collapsed[j].end()) return true;
  }
  return false;
}

FiberIndex::FiberIndex(const MapPyramid& pyramid, const PointSample& s, const FiberOptions& options)
    : pyramid_(pyramid), sample_(s), options_(options) {
  if (s.size() == 0) throw EmptySetError("fiber index needs a nonempty sample");
  if (s.dim() != pyramid.params().n) throw DimensionMismatchError("sample and pyramid dimensions differ");
  const int k = pyramid.params().k;
  const int n = s.dim();
  Matrix values(k, static_cast<Eigen::Index>(s.size()));
  frames_.resize(k * n, static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Jet2 jet = pyramid.evaluate(pyramid.built_stages(), s.point(i), JetOrder::Jacobian);
    values.col(static_cast<Eigen::Index>(i)) = jet.value;
    Matrix frame;
    try {
      frame = qr_decompose(jet.jacobian).frame;
    } catch (const RankDeficientError&) {
      frame = pyramid.rotation().topRows(k);
    }
    frames_.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(frame.data(), k * n);
  }
  values_ = PointSample(std::move(values), s.resolution());
  const double alpha = pyramid.params().alpha;
  tolerance_ = (1.0 + options.holder_constant * pyramid.params().delta_nominal) *
               std::pow(2.0 * s.resolution(), 1.0 - alpha);
}

Fiber FiberIndex::fiber(const Vector& c) const {
  if (c.size() != pyramid_.params().k) throw DimensionMismatchError("fiber target has the wrong dimension");
  if (!(c.norm() <= 1.98)) throw InvalidArgumentError("fiber target must lie in B_1.98(0)");
  Fiber f;
  f.target = c;
  f.tolerance = tolerance_;
  const Matrix& vals = values_.points();
  auto residual = [&](std::size_t i) { return (vals.col(static_cast<Eigen::Index>(i)) - c).norm(); };

  const std::vector<std::size_t> candidates = values_.indices_within(c, tolerance_);
  const int k = pyramid_.params().k;
  const int n = sample_.dim();
  const double cos_max = std::cos(options_.descent_max_angle);
  std::unordered_map<std::size_t, std::size_t> descent;
  std::vector<std::size_t> ends;
  for (std::size_t start : candidates) {
    std::vector<std::size_t> path{start};
    std::size_t cur = start;
    double r = residual(cur);
    while (true) {
      auto memo = descent.find(cur);
      if (memo != descent.end()) {
        cur = memo->second;
        break;
      }
      std::size_t best = cur;
      double best_r = r;
      const Vector here = sample_.point(cur);
      const Eigen::Map<const Matrix> frame(frames_.col(static_cast<Eigen::Index>(cur)).data(), k, n);
      for (const NearestPoint& nb : sample_.knn(here, options_.descent_neighbors + 1)) {
        const double rn = residual(nb.index);
        if (rn >= best_r) continue;
        const Vector step = sample_.point(nb.index) - here;
        if ((frame * step).norm() < cos_max * step.norm()) continue;
        {
          best = nb.index;
          best_r = rn;
        }
      }
      if (best == cur) break;
      cur = best;
      r = best_r;
      path.push_back(cur);
    }
    for (std::size_t p : path) descent[p] = cur;
    ends.push_back(cur);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  std::stable_sort(ends.begin(), ends.end(),
                   [&](std::size_t a, std::size_t b) { return residual(a) < residual(b); });

  const double merge = options_.cluster_factor * sample_.resolution();
  for (std::size_t e : ends) {
    const Vector x = sample_.point(e);
    bool taken = false;
    for (std::size_t j = 0; j < f.members.size(); ++j) {
      if ((sample_.point(f.members[j]) - x).norm() <= merge) {
        f.collapsed[j].push_back(e);
        taken = true;
        break;
      }
    }
    if (taken) continue;
    f.members.push_back(e);
    f.residuals.push_back(residual(e));
    f.collapsed.emplace_back();
  }
  return f;
}

Matrix FiberIndex::member_points(const Fiber& f) const {
  Matrix m(sample_.dim(), static_cast<Eigen::Index>(f.members.size()));
  for (std::size_t j = 0; j < f.members.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = sample_.point(f.members[j]);
  return m;
}

Fiber fiber(const MapPyramid& pyramid, const PointSample& s, const Vector& c, const FiberOptions& options) {
  return FiberIndex(pyramid, s, options).fiber(c);
}

std::vector<std::pair<Vector, Vector>> random_parameter_pairs(int k, std::size_t count, std::uint64_t seed,
                                                              double radius, double max_separation) {
  if (k <= 0 || radius <= 0.0 || max_separation <= 0.0) throw InvalidArgumentError("bad parameter pair request");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<Vector, Vector>> pairs;
  pairs.reserve(count);
  while (pairs.size() < count) {
    const Vector c = random_in_ball(rng, k, radius);
    // Log-uniform separations so that small scales are probed as often as large ones.
    const double sep = max_separation * std::pow(10.0, -3.0 * unit(rng));
    Vector w = random_in_ball(rng, k, 1.0);
    while (w.norm() == 0.0) w = random_in_ball(rng, k, 1.0);
    const Vector d = c + sep * w.normalized();
    if (d.norm() > radius) continue;
    pairs.emplace_back(c, d);
  }
  return pairs;
}

std::vector<std::pair<Vector, Vector>> random_sample_pairs(const PointSample& s, std::size_t count, std::uint64_t seed,
                                                           double radius, double max_separation) {
  const std::vector<std::size_t> inside = s.indices_within(Vector::Zero(s.dim()), radius);
  if (inside.size() < 2) throw EmptySetError("fewer than two sample points in the pair domain");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, inside.size() - 1);
  const double floor = std::min(max_separation, 2.0 * s.resolution());
  std::vector<std::pair<Vector, Vector>> pairs;
  pairs.reserve(count);
  std::size_t attempts = 0;
  while (pairs.size() < count) {
    if (++attempts > 100 * count + 1000) throw EmptySetError("could not draw enough sample pairs");
    const Vector x = s.point(inside[pick(rng)]);
    const double rho = floor * std::pow(max_separation / floor, unit(rng));
    std::vector<std::size_t> near;
    for (std::size_t j : s.indices_within(x, rho)) {
      if (s.point(j).norm() <= radius && (s.point(j) - x).norm() > 0.0) near.push_back(j);
    }
    if (near.empty()) continue;
    std::uniform_int_distribution<std::size_t> which(0, near.size() - 1);
    pairs.emplace_back(x, s.point(near[which(rng)]));
  }
  return pairs;
}

HolderReport certify_biholder(const FiberIndex& index, const std::vector<std::pair<Vector, Vector>>& pairs,
                              double alpha, const CertifyOptions& options) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgumentError("alpha must lie in (0, 1)");
  HolderReport report;
  report.alpha = alpha;
  report.delta_nominal = index.pyramid().params().delta_nominal;
  report.constant_ceiling = options.constant_ceiling;
  const double delta = report.delta_nominal;
  const double h = index.sample().resolution();

  const std::size_t half = pairs.size() / 2;
  double cu_half = 0.0, cl_half = 0.0, cu = 0.0, cl = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Fiber fc = index.fiber(pairs[p].first);
    const Fiber fd = index.fiber(pairs[p].second);
    if (fc.empty() || fd.empty()) {
      ++report.skipped;
      continue;
    }
    const Matrix a = index.member_points(fc);
    const Matrix b = index.member_points(fd);
    PairRecord rec;
    rec.c = pairs[p].first;
    rec.d = pairs[p].second;
    rec.separation = (rec.c - rec.d).norm();
    rec.hausdorff = finite_set_hausdorff(a, b);
    rec.dist = finite_set_distance(a, b);
    rec.slack = 2.0 * h + max_or_zero(fc.residuals) + max_or_zero(fd.residuals);
    if (rec.separation > 0.0) {
      const double up = std::pow(rec.separation, 1.0 - alpha);
      const double low = std::pow(rec.separation, 1.0 / (1.0 - alpha));
      rec.c_upper = ((rec.hausdorff - rec.slack) / up - 1.0) / delta;
      rec.c_lower = (1.0 - (rec.hausdorff + rec.slack) / low) / delta;
    } else {
      rec.c_upper = rec.hausdorff > rec.slack ? std::numeric_limits<double>::infinity() : 0.0;
      rec.c_lower = 0.0;
    }
    const std::size_t id = report.pairs.size();
    cu = std::max(cu, rec.c_upper);
    cl = std::max(cl, rec.c_lower);
    if (p < half) {
      cu_half = std::max(cu_half, rec.c_upper);
      cl_half = std::max(cl_half, rec.c_lower);
    }
    if (!(rec.c_upper <= options.constant_ceiling)) report.violations.emplace_back(id, "upper");
    if (!(rec.c_lower <= options.constant_ceiling)) report.violations.emplace_back(id, "lower");
    if (rec.separation > options.disjoint_factor * h && rec.dist == 0.0) report.violations.emplace_back(id, "overlap");
    report.pairs.push_back(std::move(rec));
  }
  report.c_upper = cu;
  report.c_lower = cl;
  report.c_upper_half = cu_half;
  report.c_lower_half = cl_half;
  auto close = [&](double full, double part) {
    return std::abs(full - part) <= options.stability_tolerance * std::max(full, 1.0);
  };
  report.stable = close(cu, cu_half) && close(cl, cl_half);
  const bool finite = std::isfinite(cu) && std::isfinite(cl);
  report.pass = finite && report.stable && report.violations.empty() && !report.pairs.empty();
  return report;
}

CoverageReport fiber_coverage(const FiberIndex& index, double radius) {
  CoverageReport rep;
  const PointSample& s = index.sample();
  const double merge = 2.0 * s.resolution();
  for (std::size_t i : s.indices_within(Vector::Zero(s.dim()), radius)) {
    ++rep.points;
    const Fiber f = index.fiber(index.values().col(static_cast<Eigen::Index>(i)));
    if (std::find(f.members.begin(), f.members.end(), i) != f.members.end()) ++rep.representative;
    if (f.contains(i)) ++rep.exact;
    for (std::size_t m : f.members) {
      if ((s.point(m) - s.point(i)).norm() <= merge) {
        ++rep.near;
        break;
      }
    }
  }
  return rep;
}

ContinuityReport holder_continuity(const MapPyramid& pyramid, const std::vector<std::pair<Vector, Vector>>& pairs,
                                   double alpha, double delta, double stability_tolerance) {
  ContinuityReport rep;
  const std::size_t half = pairs.size() / 2;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double sep = (pairs[p].first - pairs[p].second).norm();
    if (sep == 0.0) continue;
    const double ratio =
        (pyramid.value(pairs[p].first) - pyramid.value(pairs[p].second)).norm() / std::pow(sep, 1.0 - alpha);
    const double c = std::max(0.0, (ratio - 1.0) / delta);
    ++rep.pairs;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.c_fit = std::max(rep.c_fit, c);
    if (p < half) rep.c_fit_half = std::max(rep.c_fit_half, c);
  }
  rep.stable = std::abs(rep.c_fit - rep.c_fit_half) <= stability_tolerance * std::max(rep.c_fit, 1.0);
  return rep;
}

std::optional<Vector> gauss_newton(const MapPyramid& pyramid, int i, const Vector& c, const Vector& seed,
                                   const LevelSetOptions& options, double* residual) {
  Vector x = seed;
  for (int it = 0; it <= options.max_iterations; ++it) {
    const Jet2 jet = pyramid.evaluate(i, x, JetOrder::Jacobian);
    const Vector r = jet.value - c;
    const double rn = r.norm();
    if (residual) *residual = rn;
    if (rn <= options.tolerance) return x;
    if (it == options.max_iterations || !std::isfinite(rn)) break;
    QrFactors qr;
    try {
      qr = qr_decompose(jet.jacobian);
    } catch (const RankDeficientError&) {
      return std::nullopt;
    }
    const Vector y = qr.lower.triangularView<Eigen::Lower>().solve(r);
    x -= qr.frame.transpose() * y;
  }
  return std::nullopt;
}

LevelSetResult level_set_points(const MapPyramid& pyramid, int i, const Vector& c, const std::vector<Vector>& seeds,
                                const LevelSetOptions& options) {
  const int n = pyramid.params().n;
  const double step = options.step_fraction * pyramid.radius(i);
  CellHash seen(n, step);
  std::vector<Vector> accepted;
  std::vector<Vector> queue;
  LevelSetResult out;

  auto try_accept = [&](const Vector& guess, const Vector* from) {
    double res = 0.0;
    std::optional<Vector> y = gauss_newton(pyramid, i, c, guess, options, &res);
    if (!y) {
      ++out.dropped;
      return;
    }
    if (y->norm() > options.domain_radius) return;
    if (from && (*y - *from).norm() > 2.0 * step) return;
    if (seen.has_point_within(*y, 0.5 * step)) return;
    seen.insert(*y);
    out.max_residual = std::max(out.max_residual, res);
    accepted.push_back(*y);
    queue.push_back(*y);
  };

  for (const Vector& s : seeds) {
    if (s.size() != n) throw DimensionMismatchError("level set seed has the wrong dimension");
    try_accept(s, nullptr);
  }
  while (!queue.empty() && accepted.size() < options.max_points) {
    const Vector x = queue.back();
    queue.pop_back();
    const Jet2 jet = pyramid.evaluate(i, x, JetOrder::Jacobian);
    QrFactors qr;
    try {
      qr = qr_decompose(jet.jacobian);
    } catch (const RankDeficientError&) {
      continue;
    }
    if (pyramid.params().k >= n) continue;
    const Matrix kernel = orthogonal_complement(LinearSubspace::from_frame(qr.frame)).frame();
    for (Eigen::Index j = 0; j < kernel.rows(); ++j) {
      for (double sign : {1.0, -1.0}) {
        if (accepted.size() >= options.max_points) break;
        const Vector guess = x + sign * step * kernel.row(j).transpose();
        try_accept(guess, &x);
      }
    }
  }
  if (accepted.empty()) throw EmptySetError("no level set point converged");
  out.points = PointSample::from_rows(accepted, step);
  return out;
}

ContinuityReport level_set_sandwich(const MapPyramid& pyramid, const std::vector<std::pair<Vector, Vector>>& pairs,
                                    const LevelSetOptions& options, double window, double stability_tolerance) {
  const PyramidParams& params = pyramid.params();
  const int top = pyramid.built_stages();
  const double exponent = 1.0 / (1.0 + params.alpha);
  const double step = options.step_fraction * pyramid.radius(top);
  const Ball domain(Vector::Zero(params.n), window);
  auto trace = [&](const Vector& c) {
    Vector lifted = Vector::Zero(params.n);
    lifted.head(params.k) = c;
    return level_set_points(pyramid, top, c, {pyramid.rotation().transpose() * lifted}, options).points;
  };
  ContinuityReport rep;
  const std::size_t half = pairs.size() / 2;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double sep = (pairs[p].first - pairs[p].second).norm();
    if (sep == 0.0) continue;
    const double dh = local_hausdorff(trace(pairs[p].first), trace(pairs[p].second), domain);
    const double ratio = dh / std::pow(sep, exponent);
    // Traced points sit step apart along the level set.
    const double c = std::max(0.0, ((dh - step) / std::pow(sep, exponent) - 1.0) / params.delta_nominal);
    ++rep.pairs;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.c_fit = std::max(rep.c_fit, c);
    if (p < half) rep.c_fit_half = std::max(rep.c_fit_half, c);
  }
  rep.stable = std::abs(rep.c_fit - rep.c_fit_half) <= stability_tolerance * std::max(rep.c_fit, 1.0);
  return rep;
}

ChainResult projection_chain(const MapPyramid& pyramid, const Vector& c, const Vector& x0, int depth,
                             const LevelSetOptions& options) {
  if (depth < 0 || depth > pyramid.built_stages()) throw InvalidArgumentError("chain depth exceeds built stages");
  ChainResult out;
  std::optional<Vector> x = gauss_newton(pyramid, 0, c, x0, options);
  if (!x) {
    out.diverged = true;
    return out;
  }
  out.path.push_back(*x);
  for (int i = 1; i <= depth; ++i) {
    std::optional<Vector> next = gauss_newton(pyramid, i, c, out.path.back(), options);
    if (!next) {
      out.diverged = true;
      return out;
    }
    out.steps.push_back((*next - out.path.back()).norm());
    out.path.push_back(*next);
  }
  return out;
}

std::pair<double, double> verify_graphical(const PointSample& levelset, const Ball& ball, int dim) {
  const int n = levelset.dim();
  if (dim <= 0 || dim >= n) throw InvalidArgumentError("graph dimension must lie strictly between 0 and n");
  if (ball.dim() != n) throw DimensionMismatchError("ball and level set dimensions differ");
  const std::vector<std::size_t> idx = levelset.indices_within(ball);
  if (idx.size() < static_cast<std::size_t>(dim + 1)) throw EmptySetError("too few level set points in the ball");
  Matrix pts(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) pts.col(static_cast<Eigen::Index>(j)) = levelset.point(idx[j]);
  const Vector mean = pts.rowwise().mean();
  const Matrix centered = pts.colwise() - mean;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered * centered.transpose());
  // Eigenvalues ascend: the last `dim` vectors span the tangent plane.
  const Matrix tangent = eig.eigenvectors().rightCols(dim).transpose();
  const Matrix normal = eig.eigenvectors().leftCols(n - dim).transpose();
  double defect = 0.0;
  for (Eigen::Index j = 0; j < centered.cols(); ++j) defect = std::max(defect, (normal * centered.col(j)).norm());
  defect /= ball.radius;

  const std::size_t stride = std::max<std::size_t>(1, idx.size() / 400);
  double slope = 0.0;
  for (Eigen::Index a = 0; a < centered.cols(); a += static_cast<Eigen::Index>(stride)) {
    for (Eigen::Index b = a + 1; b < centered.cols(); b += static_cast<Eigen::Index>(stride)) {
      const Vector diff = centered.col(a) - centered.col(b);
      const double t = (tangent * diff).norm();
      if (t < 0.1 * ball.radius) continue;
      slope = std::max(slope, (normal * diff).norm() / t);
    }
  }
  return {defect, slope};
}

std::size_t doubling_cardinality(int l, int n) {
  if (l < 1 || n < 1) throw InvalidArgumentError("doubling cardinality needs l, n >= 1");
  const double side = std::ceil(10.0 * std::sqrt(static_cast<double>(n)));
  const double cells = std::pow(side, n);
  double total = 2.0;
  for (int j = 1; j < l; ++j) total *= cells;
  if (!(total < static_cast<double>(std::numeric_limits<std::size_t>::max()))) {
    return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(total);
}

bool is_doubling_chain(const std::vector<Vector>& chain) {
  if (chain.size() < 2) return false;
  if ((chain[1] - chain[0]).norm() == 0.0) return false;
  for (std::size_t i = 2; i < chain.size(); ++i) {
    if (!((chain[i] - chain[0]).norm() > 2.0 * (chain[i - 1] - chain[0]).norm())) return false;
  }
  return true;
}

namespace {

// Recursive cube-pigeonhole construction. Works on indices into `points`.
std::optional<std::vector<std::size_t>> lemma_chain(const std::vector<Vector>& points,
                                                    const std::vector<std::size_t>& subset, int l, int n) {
  if (l == 1) {
    for (std::size_t j = 1; j < subset.size(); ++j) {
      if ((points[subset[j]] - points[subset[0]]).norm() > 0.0) return std::vector<std::size_t>{subset[0], subset[j]};
    }
    return std::nullopt;
  }
  const std::size_t p = subset[0];
  std::size_t q = p;
  double d = 0.0;
  for (std::size_t s : subset) {
    const double dist = (points[s] - points[p]).norm();
    if (dist > d) {
      d = dist;
      q = s;
    }
  }
  if (d == 0.0) return std::nullopt;
  // Cubes of diameter d / 10.
  const double side = d / (10.0 * std::sqrt(static_cast<double>(n)));
  std::map<std::vector<long long>, std::vector<std::size_t>> cells;
  for (std::size_t s : subset) {
    std::vector<long long> key(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) key[j] = static_cast<long long>(std::floor(points[s](j) / side));
    cells[key].push_back(s);
  }
  const std::vector<std::size_t>* best = nullptr;
  for (const auto& kv : cells) {
    if (!best || kv.second.size() > best->size()) best = &kv.second;
  }
  if (best->size() < doubling_cardinality(l - 1, n)) return std::nullopt;
  std::optional<std::vector<std::size_t>> inner = lemma_chain(points, *best, l - 1, n);
  if (!inner) return std::nullopt;
  const Vector& x0 = points[inner->front()];
  inner->push_back((points[p] - x0).norm() >= (points[q] - x0).norm() ? p : q);
  return inner;
}

// For a fixed x_0, taking the nearest admissible point at each step keeps every
// later threshold as small as possible, so this finds a chain whenever one exists.
std::optional<std::vector<std::size_t>> greedy_chain(const std::vector<Vector>& points, std::size_t root, int l) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double d = (points[j] - points[root]).norm();
    if (d > 0.0) order.emplace_back(d, j);
  }
  std::sort(order.begin(), order.end());
  if (order.empty()) return std::nullopt;
  std::vector<std::size_t> chain{root, order[0].second};
  double last = order[0].first;
  for (std::size_t t = 1; t < order.size() && static_cast<int>(chain.size()) < l + 1; ++t) {
    if (order[t].first > 2.0 * last) {
      chain.push_back(order[t].second);
      last = order[t].first;
    }
  }
  if (static_cast<int>(chain.size()) < l + 1) return std::nullopt;
  return chain;
}

}  // namespace

std::optional<std::vector<Vector>> select_doubling_chain(const std::vector<Vector>& points, int l) {
  if (l < 1) throw InvalidArgumentError("chain length must be at least 1");
  if (points.empty()) return std::nullopt;
  const int n = static_cast<int>(points[0].size());
  for (const Vector& p : points) {
    if (p.size() != n) throw DimensionMismatchError("points of different dimensions");
  }
  auto materialize = [&](const std::vector<std::size_t>& idx) {
    std::vector<Vector> out;
    for (std::size_t i : idx) out.push_back(points[i]);
    return out;
  };
  if (points.size() >= doubling_cardinality(l, n)) {
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), 0);
    if (auto chain = lemma_chain(points, all, l, n)) {
      std::vector<Vector> out = materialize(*chain);
      if (is_doubling_chain(out)) return out;
    }
  }
  for (std::size_t root = 0; root < points.size(); ++root) {
    if (auto chain = greedy_chain(points, root, l)) {
      std::vector<Vector> out = materialize(*chain);
      if (is_doubling_chain(out)) return out;
    }
  }
  return std::nullopt;
}

CardinalityAudit cardinality_audit(const FiberIndex& index, const std::vector<Vector>& cs, std::size_t n_prime) {
  CardinalityAudit audit;
  audit.threshold = n_prime;
  for (std::size_t q = 0; q < cs.size(); ++q) {
    const Fiber f = index.fiber(cs[q]);
    audit.sizes.push_back(f.size());
    audit.max_size = std::max(audit.max_size, f.size());
    if (f.size() > n_prime) {
      const Matrix pts = index.member_points(f);
      std::vector<Vector> rows;
      for (Eigen::Index j = 0; j < pts.cols(); ++j) rows.push_back(pts.col(j));
      // A chain one longer than the bad-scale bound is the contradiction witness.
      audit.witnesses.emplace_back(q, select_doubling_chain(rows, static_cast<int>(n_prime) + 1));
    }
  }
  return audit;
}

Json to_json(const HolderReport& report) {
  Json j;
  j["alpha"] = report.alpha;
  j["delta_nominal"] = report.delta_nominal;
  Json pairs = Json::array();
  for (const PairRecord& p : report.pairs) {
    Json r;
    r["c"] = to_json(p.c);
    r["d"] = to_json(p.d);
    r["separation"] = p.separation;
    r["hausdorff"] = p.hausdorff;
    r["dist"] = p.dist;
    r["slack"] = p.slack;
    r["c_upper"] = p.c_upper;
    r["c_lower"] = p.c_lower;
    pairs.push_back(std::move(r));
  }
  j["pairs"] = std::move(pairs);
  j["skipped"] = report.skipped;
  j["C_lower"] = report.c_lower;
  j["C_upper"] = report.c_upper;
  j["C_lower_half"] = report.c_lower_half;
  j["C_upper_half"] = report.c_upper_half;
  j["stable"] = report.stable;
  j["constant_ceiling"] = report.constant_ceiling;
  Json v = Json::array();
  for (const auto& [id, reason] : report.violations) v.push_back(Json{{"pair", id}, {"reason", reason}});
  j["violations"] = std::move(v);
  j["pass"] = report.pass;
  return j;
}

Json to_json(const ContinuityReport& report) {
  Json j;
  j["pairs"] = report.pairs;
  j["C_fit"] = report.c_fit;
  j["C_fit_half"] = report.c_fit_half;
  j["max_ratio"] = report.max_ratio;
  j["stable"] = report.stable;
  return j;
}

Json to_json(const CardinalityAudit& audit) {
  Json j;
  j["max_size"] = audit.max_size;
  j["threshold"] = audit.threshold;
  j["sizes"] = audit.sizes;
  Json w = Json::array();
  for (const auto& [q, chain] : audit.witnesses) {
    Json e;
    e["query"] = q;
    if (chain) {
      Json c = Json::array();
      for (const Vector& x : *chain) c.push_back(to_json(x));
      e["chain"] = std::move(c);
    } else {
      e["chain"] = nullptr;
    }
    w.push_back(std::move(e));
  }
  j["witnesses"] = std::move(w);
  return j;
}

Json to_json(const CoverageReport& report) {
  return Json{{"points", report.points}, {"exact", report.exact}, {"representative", report.representative},
              {"near", report.near},
              {"complete", report.complete()}};
}

void write_fibers_csv(const FiberIndex& index, const std::vector<Fiber>& fibers, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgumentError("cannot open " + path + " for writing");
  const int k = index.pyramid().params().k;
  const int n = index.sample().dim();
  for (int j = 0; j < k; ++j) out << (j ? "," : "") << "c" << j;
  for (int j = 0; j < n; ++j) out << ",x" << j;
  out << ",residual\n";
  for (const Fiber& f : fibers) {
    for (std::size_t m = 0; m < f.members.size(); ++m) {
      for (int j = 0; j < k; ++j) out << (j ? "," : "") << format_double(f.target(j));
      const Vector x = index.sample().point(f.members[m]);
      for (int j = 0; j < n; ++j) out << "," << format_double(x(j));
      out << "," << format_double(f.residuals[m]) << "\n";
    }
  }
  if (!out) throw InvalidArgumentError("failed writing " + path);
}

}  // namespace reifsplit
