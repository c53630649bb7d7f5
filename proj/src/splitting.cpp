#include "reifsplit/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <tuple>

#include "reifsplit/error.hpp"

namespace reifsplit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lattice points of spacing ~`spacing` in the closed k-ball of radius rho, plus
// boundary points for k <= 2 so the sampled disk reaches its rim.
std::vector<Vector> disk_grid(int k, double rho, double spacing) {
  std::vector<Vector> out;
  if (rho <= 0.0) {
    out.push_back(Vector::Zero(k));
    return out;
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * rho / spacing)));
  const double s = 2.0 * rho / steps;
  if (k == 1) {
    for (int i = 0; i <= steps; ++i) out.push_back(Vector::Constant(1, -rho + i * s));
    return out;
  }
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  while (true) {
    Vector u(k);
    for (int d = 0; d < k; ++d) u(d) = -rho + idx[static_cast<std::size_t>(d)] * s;
    if (u.norm() <= rho) out.push_back(u);
    int d = 0;
    while (d < k && ++idx[static_cast<std::size_t>(d)] > steps) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == k) break;
  }
  if (k == 2) {
    const int around = std::max(8, static_cast<int>(std::ceil(2.0 * M_PI * rho / s)));
    for (int i = 0; i < around; ++i) {
      const double t = 2.0 * M_PI * i / around;
      Vector u(2);
      u << rho * std::cos(t), rho * std::sin(t);
      out.push_back(u);
    }
  }
  return out;
}

// Largest distance from the part of the plane base + span(F^T) inside the ball
// to the full sample.
double plane_to_sample(const PointSample& s, const Ball& ball, const Matrix& f, const Vector& base,
                       double spacing) {
  const Vector foot = base + f.transpose() * (f * (ball.center - base));
  const double gap = (ball.center - foot).norm();
  if (gap > ball.radius) return 0.0;
  const double rho = std::sqrt(std::max(0.0, ball.radius * ball.radius - gap * gap));
  double worst = 0.0;
  for (const Vector& u : disk_grid(f.rows(), rho, spacing)) {
    const Vector p = foot + f.transpose() * u;
    if ((p - ball.center).norm() > ball.radius) continue;
    worst = std::max(worst, s.distance_to(p));
  }
  return worst;
}

Matrix top_eigenvectors(const Matrix& cov, int k, bool* ok) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector& vals = eig.eigenvalues();  // ascending
  const int n = static_cast<int>(cov.rows());
  const double top = vals(n - 1);
  *ok = top > 0.0 && vals(n - k) > 1e-12 * top;
  Matrix frame(k, n);
  for (int i = 0; i < k; ++i) {
    Vector v = eig.eigenvectors().col(n - 1 - i);
    // Sign convention: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    frame.row(i) = v.transpose();
  }
  return frame;
}

// Completes rows of `partial` (orthonormal, fewer than n) to an orthonormal basis
// using coordinate axes in order of least overlap.
Matrix complete_basis(const Matrix& partial, int n) {
  Matrix basis(n, n);
  int filled = static_cast<int>(partial.rows());
  basis.topRows(filled) = partial;
  for (int axis = 0; axis < n && filled < n; ++axis) {
    Vector v = Vector::Unit(n, axis);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < filled; ++j) v -= basis.row(j).dot(v) * basis.row(j).transpose();
    }
    if (v.norm() > 1e-6) basis.row(filled++) = v.normalized().transpose();
  }
  return basis;
}

struct Fit {
  Matrix basis;                 // n x n: rows 0..k-1 direction, rest complement
  std::vector<Vector> offsets;  // complement coordinates relative to the center
  double objective = kInf;      // absolute
};

class Detector {
 public:
  Detector(const PointSample& s, const Ball& ball, int k, int max_sheets, const DetectOptions& opt)
      : s_(s), ball_(ball), k_(k), n_(s.dim()), sheets_(max_sheets), opt_(opt), h_(s.resolution()) {
    auto idx = s.indices_within(ball);
    if (idx.empty()) throw EmptySetError("detect_splitting: S does not meet the ball");
    if (idx.size() > opt.max_fit_points) {
      std::vector<std::size_t> thin;
      const double stride = static_cast<double>(idx.size()) / static_cast<double>(opt.max_fit_points);
      for (std::size_t i = 0; i < opt.max_fit_points; ++i) {
        thin.push_back(idx[static_cast<std::size_t>(std::floor(i * stride))]);
      }
      idx.swap(thin);
    }
    fit_idx_ = idx;
    rel_.resize(n_, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      rel_.col(static_cast<Eigen::Index>(j)) = s.point(idx[j]) - ball.center;
    }
    exact_ = opt.exact_offsets && n_ - k_ == 1;
    if (k_ == 1) {
      plane_spacing_ = std::max(2.0 * h_, 2.0 * ball.radius / 48.0);
    } else {
      plane_spacing_ = std::max(2.0 * h_ / std::sqrt(double(k_)), 2.0 * ball.radius / 16.0);
    }
    grid_cap_ = k_ == 1 ? 97 : 49;
  }

  SplittingCertificate run() {
    Matrix basis = complete_basis(initial_direction(), n_);
    Fit best;
    double previous = kInf;
    double linkage_defect = 0.0;
    bool converged = false;
    int it = 0;
    for (; it < opt_.max_iterations; ++it) {
      Fit fit = exact_ ? fit_exact(basis) : fit_linkage(basis, linkage_defect);
      linkage_defect = fit.objective;
      if (fit.objective < best.objective) best = fit;
      if (previous - fit.objective < 1e-3 * ball_.radius) {
        converged = true;
        ++it;
        break;
      }
      previous = fit.objective;
      basis = refit(fit);
    }
    if (exact_ && k_ * (n_ - k_) <= opt_.polish_max_parameters) best = polish(best);

    const Matrix comp = best.basis.bottomRows(n_ - k_);
    std::vector<Vector> offsets;
    for (const Vector& a : best.offsets) offsets.push_back(ball_.center + comp.transpose() * a);
    SplittingCertificate cert =
        make_certificate(s_, ball_, LinearSubspace::from_frame(best.basis.topRows(k_)), std::move(offsets));
    cert.converged = converged;
    cert.iterations = it;
    return cert;
  }

 private:
  Matrix initial_direction() {
    const double rho = std::max(ball_.radius / (4.0 * sheets_), 3.0 * h_);
    Matrix cov = Matrix::Zero(n_, n_);
    std::size_t count = 0;
    const std::size_t cap = 1500;
    const double stride = std::max(1.0, static_cast<double>(fit_idx_.size()) / cap);
    for (double t = 0; t < static_cast<double>(fit_idx_.size()); t += stride) {
      const Vector p = s_.point(fit_idx_[static_cast<std::size_t>(t)]);
      for (const auto& nb : s_.knn(p, 9)) {
        if (nb.distance <= 0.0 || nb.distance > rho) continue;
        const Vector d = s_.point(nb.index) - p;
        cov += d * d.transpose();
        ++count;
      }
    }
    bool ok = false;
    if (count >= static_cast<std::size_t>(k_)) {
      Matrix f = top_eigenvectors(cov, k_, &ok);
      if (ok) return f;
    }
    if (rel_.cols() > k_) {
      const Vector mean = rel_.rowwise().mean();
      const Matrix c = rel_.colwise() - mean;
      Matrix f = top_eigenvectors(c * c.transpose(), k_, &ok);
      if (ok) return f;
    }
    return LinearSubspace::coordinate(k_, n_).frame();
  }

  // Rows of `basis` below k span the complement; returns coordinates, d x M.
  Matrix project(const Matrix& basis) const { return basis.bottomRows(n_ - k_) * rel_; }

  double plane_cost(const Matrix& basis, double a) const {
    const Matrix comp = basis.bottomRows(1);
    const Vector base = ball_.center + comp.transpose() * Vector::Constant(1, a);
    return plane_to_sample(s_, ball_, basis.topRows(k_), base, plane_spacing_);
  }

  // n - k = 1: smallest threshold T such that at most c offsets on a grid cover
  // every projection within T while each offset's plane stays within T of S.
  Fit fit_exact(const Matrix& basis) const {
    const Matrix proj = project(basis);
    std::vector<double> q(proj.data(), proj.data() + proj.size());
    std::sort(q.begin(), q.end());
    const double lo = q.front(), hi = q.back();
    const int count = std::clamp(static_cast<int>(std::ceil((hi - lo) / (0.25 * h_))) + 1, 1, grid_cap_);
    std::vector<double> grid(static_cast<std::size_t>(count));
    std::vector<double> cost(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      grid[static_cast<std::size_t>(i)] = count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1);
      cost[static_cast<std::size_t>(i)] = plane_cost(basis, grid[static_cast<std::size_t>(i)]);
    }

    auto cover = [&](double t, int limit, std::vector<double>* chosen) {
      chosen->clear();
      std::size_t i = 0;
      while (i < q.size()) {
        if (static_cast<int>(chosen->size()) == limit) return false;
        int pick = -1;
        for (int g = count - 1; g >= 0; --g) {
          const double a = grid[static_cast<std::size_t>(g)];
          if (a > q[i] + t) continue;
          if (a < q[i] - t) break;
          if (cost[static_cast<std::size_t>(g)] <= t) {
            pick = g;
            break;
          }
        }
        if (pick < 0) return false;
        const double a = grid[static_cast<std::size_t>(pick)];
        chosen->push_back(a);
        while (i < q.size() && q[i] <= a + t) ++i;
      }
      return true;
    };

    const double upper = std::max(hi - lo, *std::max_element(cost.begin(), cost.end())) + 1e-12;
    std::vector<double> thresholds(static_cast<std::size_t>(sheets_) + 1, kInf);
    std::vector<std::vector<double>> solutions(static_cast<std::size_t>(sheets_) + 1);
    for (int c = 1; c <= sheets_; ++c) {
      double a = 0.0, b = upper;
      std::vector<double> chosen;
      cover(b, c, &chosen);
      solutions[static_cast<std::size_t>(c)] = chosen;
      for (int iter = 0; iter < 48 && b - a > 1e-14 * std::max(1.0, b); ++iter) {
        const double mid = 0.5 * (a + b);
        if (cover(mid, c, &chosen)) {
          b = mid;
          solutions[static_cast<std::size_t>(c)] = chosen;
        } else {
          a = mid;
        }
      }
      thresholds[static_cast<std::size_t>(c)] = b;
    }
    const double target = thresholds[static_cast<std::size_t>(sheets_)];
    const double tol = std::max(0.5 * h_, 0.01 * target);
    int c = 1;
    while (c < sheets_ && thresholds[static_cast<std::size_t>(c)] > target + tol) ++c;

    Fit fit;
    fit.basis = basis;
    for (double a : solutions[static_cast<std::size_t>(c)]) fit.offsets.push_back(Vector::Constant(1, a));
    fit.objective = thresholds[static_cast<std::size_t>(c)];
    return fit;
  }

  // Single-linkage clusters of the projections at threshold max(4 * defect, 2h),
  // split at no more than max_sheets - 1 links; offsets are cluster means.
  Fit fit_linkage(const Matrix& basis, double defect) const {
    const Matrix proj = project(basis);
    const double tau = std::max(4.0 * defect, 2.0 * h_);
    const Eigen::Index m = proj.cols();
    std::vector<int> label(static_cast<std::size_t>(m), 0);
    int clusters = 1;
    if (proj.rows() == 1) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return proj(0, a) < proj(0, b); });
      std::vector<std::pair<double, std::size_t>> gaps;
      for (std::size_t i = 1; i < order.size(); ++i) {
        const double g = proj(0, order[i]) - proj(0, order[i - 1]);
        if (g > tau) gaps.emplace_back(g, i);
      }
      std::sort(gaps.begin(), gaps.end(), [](auto& a, auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
      if (gaps.size() > static_cast<std::size_t>(sheets_ - 1)) gaps.resize(static_cast<std::size_t>(sheets_ - 1));
      std::vector<std::size_t> cuts;
      for (auto& g : gaps) cuts.push_back(g.second);
      std::sort(cuts.begin(), cuts.end());
      int current = 0;
      std::size_t next_cut = 0;
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (next_cut < cuts.size() && i == cuts[next_cut]) {
          ++current;
          ++next_cut;
        }
        label[static_cast<std::size_t>(order[i])] = current;
      }
      clusters = current + 1;
    } else {
      // Prim's MST on a deterministic subsample, then propagate labels by nearest member.
      const std::size_t cap = 2000;
      std::vector<Eigen::Index> sub;
      const double stride = std::max(1.0, static_cast<double>(m) / cap);
      for (double t = 0; t < static_cast<double>(m); t += stride) sub.push_back(static_cast<Eigen::Index>(t));
      const std::size_t ns = sub.size();
      std::vector<double> best(ns, kInf);
      std::vector<std::size_t> parent(ns, 0);
      std::vector<bool> in(ns, false);
      std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
      best[0] = 0.0;
      for (std::size_t step = 0; step < ns; ++step) {
        std::size_t u = ns;
        for (std::size_t v = 0; v < ns; ++v) {
          if (!in[v] && (u == ns || best[v] < best[u])) u = v;
        }
        in[u] = true;
        if (step > 0) edges.emplace_back(best[u], parent[u], u);
        for (std::size_t v = 0; v < ns; ++v) {
          if (in[v]) continue;
          const double d = (proj.col(sub[u]) - proj.col(sub[v])).norm();
          if (d < best[v]) {
            best[v] = d;
            parent[v] = u;
          }
        }
      }
      std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) { return std::get<0>(a) > std::get<0>(b); });
      std::vector<std::size_t> root(ns);
      std::iota(root.begin(), root.end(), 0);
      std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        while (root[a] != a) a = root[a] = root[root[a]];
        return a;
      };
      std::size_t removed = 0;
      for (auto& [len, a, b] : edges) {
        if (len > tau && removed < static_cast<std::size_t>(sheets_ - 1)) {
          ++removed;
          continue;
        }
        root[find(a)] = find(b);
      }
      std::vector<int> sublabel(ns, -1);
      std::vector<int> remap(ns, -1);
      clusters = 0;
      for (std::size_t i = 0; i < ns; ++i) {
        const std::size_t r = find(i);
        if (remap[r] < 0) remap[r] = clusters++;
        sublabel[i] = remap[r];
      }
      for (Eigen::Index j = 0; j < m; ++j) {
        double bd = kInf;
        for (std::size_t i = 0; i < ns; ++i) {
          const double d = (proj.col(j) - proj.col(sub[i])).squaredNorm();
          if (d < bd) {
            bd = d;
            label[static_cast<std::size_t>(j)] = sublabel[i];
          }
        }
      }
    }
    Fit fit;
    fit.basis = basis;
    std::vector<Vector> sums(static_cast<std::size_t>(clusters), Vector::Zero(proj.rows()));
    std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
    for (Eigen::Index j = 0; j < m; ++j) {
      sums[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])] += proj.col(j);
      ++counts[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])];
    }
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        fit.offsets.push_back(sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)]);
      }
    }
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      double d = kInf;
      for (const Vector& a : fit.offsets) d = std::min(d, (proj.col(j) - a).norm());
      worst = std::max(worst, d);
    }
    fit.objective = worst;
    return fit;
  }

  // Top-k principal subspace of the points centered per nearest offset.
  Matrix refit(const Fit& fit) const {
    const Matrix proj = project(fit.basis);
    const int groups = static_cast<int>(fit.offsets.size());
    std::vector<Vector> sums(static_cast<std::size_t>(groups), Vector::Zero(n_));
    std::vector<int> counts(static_cast<std::size_t>(groups), 0);
    std::vector<int> label(static_cast<std::size_t>(rel_.cols()), 0);
    for (Eigen::Index j = 0; j < rel_.cols(); ++j) {
      double bd = kInf;
      for (int g = 0; g < groups; ++g) {
        const double d = (proj.col(j) - fit.offsets[static_cast<std::size_t>(g)]).norm();
        if (d < bd) {
          bd = d;
          label[static_cast<std::size_t>(j)] = g;
        }
      }
      sums[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])] += rel_.col(j);
      ++counts[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])];
    }
    Matrix cov = Matrix::Zero(n_, n_);
    for (Eigen::Index j = 0; j < rel_.cols(); ++j) {
      const int g = label[static_cast<std::size_t>(j)];
      const Vector z = rel_.col(j) - sums[static_cast<std::size_t>(g)] / counts[static_cast<std::size_t>(g)];
      cov += z * z.transpose();
    }
    bool ok = false;
    const Matrix f = top_eigenvectors(cov, k_, &ok);
    if (!ok) return fit.basis;
    return complete_basis(f, n_);
  }

  Fit polish(Fit best) const {
    const int d = n_ - k_;
    for (double step = 1e-2; step >= 1e-4; step *= 0.5) {
      for (int sweep = 0; sweep < 20; ++sweep) {
        bool improved = false;
        for (int i = 0; i < k_; ++i) {
          for (int j = 0; j < d; ++j) {
            for (double sign : {1.0, -1.0}) {
              Matrix b = best.basis;
              const double c = std::cos(sign * step), sn = std::sin(sign * step);
              const Vector fi = best.basis.row(i).transpose();
              const Vector gj = best.basis.row(k_ + j).transpose();
              b.row(i) = (c * fi + sn * gj).transpose();
              b.row(k_ + j) = (-sn * fi + c * gj).transpose();
              Fit trial = fit_exact(b);
              if (trial.objective < best.objective - 1e-15) {
                best = std::move(trial);
                improved = true;
              }
            }
          }
        }
        if (!improved) break;
      }
    }
    return best;
  }

  const PointSample& s_;
  Ball ball_;
  int k_;
  int n_;
  int sheets_;
  DetectOptions opt_;
  double h_;
  bool exact_ = true;
  double plane_spacing_ = 0.0;
  int grid_cap_ = 97;
  std::vector<std::size_t> fit_idx_;
  Matrix rel_;
};

void check_certificate_shape(const PointSample& s, const SplittingCertificate& cert) {
  if (cert.n() != s.dim() || cert.ball.dim() != s.dim()) {
    throw DimensionMismatchError("certificate and sample live in different R^n");
  }
  if (cert.offsets.empty()) throw InconsistentCertificateError("certificate has no offsets");
}

}  // namespace

double offset_set_diameter(const std::vector<Vector>& offsets) {
  double d = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    for (std::size_t j = i + 1; j < offsets.size(); ++j) d = std::max(d, (offsets[i] - offsets[j]).norm());
  }
  return d;
}

double measure_defect(const PointSample& s, const SplittingCertificate& cert) {
  check_certificate_shape(s, cert);
  const Matrix f = cert.direction.frame();
  const Matrix comp = orthogonal_complement(cert.direction).frame();
  double worst = 0.0;
  for (std::size_t i : s.indices_within(cert.ball)) {
    const Vector y = s.point(i);
    double d = kInf;
    for (const Vector& o : cert.offsets) d = std::min(d, (comp * (y - o)).norm());
    worst = std::max(worst, d);
  }
  const double spacing = 2.0 * s.resolution() / std::sqrt(static_cast<double>(cert.k()));
  for (const Vector& o : cert.offsets) worst = std::max(worst, plane_to_sample(s, cert.ball, f, o, spacing));
  return worst / cert.ball.radius;
}

SplittingCertificate make_certificate(const PointSample& s, const Ball& ball, LinearSubspace direction,
                                      std::vector<Vector> offsets) {
  if (direction.ambient_dim() != s.dim()) throw DimensionMismatchError("direction not in R^n of the sample");
  if (direction.dim() >= s.dim()) throw InvalidArgumentError("splitting dimension k must be below n");
  SplittingCertificate cert;
  cert.ball = ball;
  const Matrix f = direction.frame();
  for (Vector& o : offsets) o -= f.transpose() * (f * (o - ball.center));
  cert.direction = std::move(direction);
  cert.offsets = std::move(offsets);
  cert.offset_diameter = offset_set_diameter(cert.offsets);
  cert.defect = measure_defect(s, cert);
  return cert;
}

SplittingCertificate detect_splitting(const PointSample& s, const Ball& ball, int k, int max_sheets,
                                      const DetectOptions& options) {
  if (ball.dim() != s.dim()) throw DimensionMismatchError("detect_splitting: ball dimension mismatch");
  if (k < 1 || k >= s.dim()) throw InvalidArgumentError("detect_splitting: need 1 <= k < n");
  if (max_sheets < 1) throw InvalidArgumentError("detect_splitting: N must be at least 1");
  Detector det(s, ball, k, max_sheets, options);
  return det.run();
}

SplittingCertificate reduce_splitting_set(const PointSample& s, const SplittingCertificate& cert) {
  check_certificate_shape(s, cert);
  const Matrix comp = orthogonal_complement(cert.direction).frame();
  const auto idx = s.indices_within(cert.ball);
  const double limit = cert.defect * cert.ball.radius * (1.0 + 1e-9) + 1e-12;
  std::vector<Vector> kept;
  for (const Vector& o : cert.offsets) {
    double d = kInf;
    for (std::size_t i : idx) d = std::min(d, (comp * (s.point(i) - o)).norm());
    if (d <= limit) kept.push_back(o);
  }
  if (kept.empty()) throw InconsistentCertificateError("reduce_splitting_set: every offset was dropped");
  if (kept.size() == cert.offsets.size()) return cert;
  SplittingCertificate out = cert;
  out.offsets = std::move(kept);
  out.offset_diameter = offset_set_diameter(out.offsets);
  out.defect = measure_defect(s, out);
  return out;
}

double compare_directions(const SplittingCertificate& c1, const SplittingCertificate& c2) {
  return subspace_distance(c1.direction, c2.direction);
}

std::pair<double, double> uniqueness_gap(const PointSample& s, const Ball& ball,
                                         const SplittingCertificate& c1, const SplittingCertificate& c2) {
  for (const auto* c : {&c1, &c2}) {
    if (c->ball.dim() != ball.dim() || (c->ball.center - ball.center).norm() > 1e-12 ||
        std::abs(c->ball.radius - ball.radius) > 1e-12 * ball.radius) {
      throw InvalidArgumentError("uniqueness_gap: certificates belong to a different ball");
    }
  }
  if (s.indices_within(ball.center, 0.5 * ball.radius).empty()) {
    throw EmptySetError("uniqueness_gap: S misses the half ball");
  }
  auto one_side = [](const std::vector<Vector>& a, const std::vector<Vector>& b) {
    double worst = 0.0;
    for (const Vector& p : a) {
      double d = kInf;
      for (const Vector& q : b) d = std::min(d, (p - q).norm());
      worst = std::max(worst, d);
    }
    return worst;
  };
  return {subspace_distance(c1.direction, c2.direction),
          std::max(one_side(c1.offsets, c2.offsets), one_side(c2.offsets, c1.offsets))};
}

namespace {

void check_chain(const std::vector<Ball>& chain, int m) {
  if (chain.empty()) throw InvalidArgumentError("census: empty chain");
  const double ratio = std::ldexp(1.0, -m);
  for (std::size_t i = 1; i < chain.size(); ++i) {
    const Ball& outer = chain[i - 1];
    const Ball& inner = chain[i];
    if (std::abs(inner.radius - ratio * outer.radius) > 1e-9 * outer.radius) {
      throw InvalidArgumentError("census: radii must shrink by 2^-m per step");
    }
    if ((inner.center - outer.center).norm() + inner.radius > outer.radius * (1.0 + 1e-12)) {
      throw InvalidArgumentError("census: chain is not nested");
    }
  }
}

void record(BadScaleReport& report, const SplittingCertificate& cert, int m, std::size_t i) {
  report.chain.push_back(cert.ball);
  report.offset_diameters.push_back(cert.offset_diameter);
  report.defects.push_back(cert.defect);
  report.offset_counts.push_back(cert.offsets.size());
  if (cert.offset_diameter >= std::ldexp(1.0, -m + 2) * cert.ball.radius) report.bad_indices.push_back(i);
  report.count = report.bad_indices.size();
}

}  // namespace

BadScaleReport census_bad_scales(const WindowSampler& sampler, const std::vector<Ball>& chain, int k,
                                 int max_sheets, int m, const DetectOptions& options) {
  check_chain(chain, m);
  BadScaleReport report;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Ball& b = chain[i];
    const PointSample local = sampler(b);
    if (b.radius < 10.0 * local.resolution()) {
      throw ResolutionError("census: radius " + format_double(b.radius) + " is below 10h");
    }
    if (local.indices_within(b.center, 0.5 * b.radius).empty()) {
      throw InvalidArgumentError("census: S misses the half ball at scale " + std::to_string(i));
    }
    record(report, detect_splitting(local, b, k, max_sheets, options), m, i);
  }
  return report;
}

BadScaleReport census_bad_scales(const PointSample& s, const std::vector<Ball>& chain, int k, int max_sheets,
                                 int m, const DetectOptions& options) {
  return census_bad_scales([&s](const Ball&) { return s; }, chain, k, max_sheets, m, options);
}

std::vector<Ball> descending_chain(const WindowSampler& sampler, const Vector& start, double r0, int m,
                                   int depth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Ball> chain;
  Vector center = start;
  double r = r0;
  for (int i = 0; i <= depth; ++i) {
    chain.emplace_back(center, r);
    if (i == depth) break;
    const PointSample local = sampler(chain.back());
    const auto idx = local.indices_within(center, 0.5 * r);
    if (idx.empty()) throw EmptySetError("descending_chain: S misses the half ball");
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    center = local.point(idx[pick(rng)]);
    r = std::ldexp(r, -m);
  }
  return chain;
}

std::vector<Ball> descending_chain(const PointSample& s, const Vector& start, double r0, int m, int depth,
                                   std::uint64_t seed) {
  return descending_chain([&s](const Ball&) { return s; }, start, r0, m, depth, seed);
}

Json to_json(const SplittingCertificate& cert) {
  Json offsets = Json::array();
  for (const Vector& o : cert.offsets) offsets.push_back(to_json(o));
  return Json{{"center", to_json(cert.ball.center)},
              {"radius", cert.ball.radius},
              {"k", cert.k()},
              {"direction_frame", to_json(cert.direction.frame())},
              {"offsets", std::move(offsets)},
              {"defect", cert.defect},
              {"offset_diameter", cert.offset_diameter},
              {"converged", cert.converged}};
}

SplittingCertificate certificate_from_json(const Json& j) {
  SplittingCertificate cert;
  cert.ball = Ball(vector_from_json(j.at("center")), j.at("radius").get<double>());
  cert.direction = LinearSubspace::from_frame(matrix_from_json(j.at("direction_frame")));
  if (cert.direction.dim() != j.at("k").get<int>()) throw InvalidArgumentError("certificate JSON: k mismatch");
  for (const auto& o : j.at("offsets")) cert.offsets.push_back(vector_from_json(o));
  cert.defect = j.at("defect").get<double>();
  cert.offset_diameter = j.at("offset_diameter").get<double>();
  cert.converged = j.value("converged", true);
  return cert;
}

Json to_json(const BadScaleReport& report) {
  Json chain = Json::array();
  for (const Ball& b : report.chain) chain.push_back(to_json(b));
  return Json{{"chain", std::move(chain)},
              {"offset_diameters", report.offset_diameters},
              {"defects", report.defects},
              {"offset_counts", report.offset_counts},
              {"bad_indices", report.bad_indices},
              {"count", report.count}};
}

}  // namespace reifsplit
