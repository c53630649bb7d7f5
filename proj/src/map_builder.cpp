#include "reifsplit/map_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reifsplit/error.hpp"

namespace reifsplit {

double BumpProfile::value(double t) {
  if (t < kPlateau) return 1.0;
  if (t >= kSupport) return 0.0;
  const double s = (t - kPlateau) / kWidth;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double BumpProfile::first(double t) {
  if (t < kPlateau || t >= kSupport) return 0.0;
  const double s = (t - kPlateau) / kWidth;
  return -30.0 * s * s * (1.0 - s) * (1.0 - s) / kWidth;
}

double BumpProfile::second(double t) {
  if (t < kPlateau || t >= kSupport) return 0.0;
  const double s = (t - kPlateau) / kWidth;
  return -60.0 * s * (2.0 * s - 1.0) * (s - 1.0) / (kWidth * kWidth);
}

ScalarJet ScalarJet::constant(double v, int n) { return {v, Vector::Zero(n), Matrix::Zero(n, n)}; }

namespace {

// Jet arithmetic truncated at `order` (0: value, 1: + gradient, 2: + Hessian).
struct JetOps {
  int n;
  int order;

  ScalarJet constant(double v) const {
    ScalarJet j;
    j.value = v;
    if (order >= 1) j.grad = Vector::Zero(n);
    if (order >= 2) j.hess = Matrix::Zero(n, n);
    return j;
  }

  void add_to(ScalarJet& a, const ScalarJet& b, double scale = 1.0) const {
    a.value += scale * b.value;
    if (order >= 1) a.grad += scale * b.grad;
    if (order >= 2) a.hess += scale * b.hess;
  }

  ScalarJet mul(const ScalarJet& a, const ScalarJet& b) const {
    ScalarJet j;
    j.value = a.value * b.value;
    if (order >= 1) j.grad = a.grad * b.value + a.value * b.grad;
    if (order >= 2) {
      j.hess = a.hess * b.value + a.value * b.hess + a.grad * b.grad.transpose() + b.grad * a.grad.transpose();
    }
    return j;
  }

  ScalarJet div(const ScalarJet& a, const ScalarJet& b) const {
    ScalarJet q;
    q.value = a.value / b.value;
    if (order >= 1) q.grad = (a.grad - q.value * b.grad) / b.value;
    if (order >= 2) {
      q.hess = (a.hess - q.grad * b.grad.transpose() - b.grad * q.grad.transpose() - q.value * b.hess) / b.value;
    }
    return q;
  }

  ScalarJet bump(const Vector& x, const Vector& c, double radius) const {
    const Vector diff = x - c;
    const double d = diff.norm();
    const double t = d / radius;
    ScalarJet j = constant(BumpProfile::value(t));
    if (t < BumpProfile::kPlateau || t >= BumpProfile::kSupport || order == 0) return j;
    const Vector u = diff / d;
    const double p1 = BumpProfile::first(t) / radius;
    j.grad = p1 * u;
    if (order >= 2) {
      const double p2 = BumpProfile::second(t) / (radius * radius);
      const Matrix uu = u * u.transpose();
      j.hess = p2 * uu + (p1 / d) * (Matrix::Identity(n, n) - uu);
    }
    return j;
  }
};

std::vector<PartitionWeight> weights_with_order(const CoverLevel& cover, const Vector& x, int order) {
  const JetOps ops{static_cast<int>(x.size()), order};
  std::vector<PartitionWeight> raw;
  for (std::size_t a : cover.centers.indices_within(x, BumpProfile::kSupport * cover.radius)) {
    ScalarJet j = ops.bump(x, cover.centers.point(a), cover.radius);
    if (j.value > 0.0) raw.push_back({a, std::move(j)});
  }
  if (raw.empty()) return raw;
  ScalarJet total = ops.constant(0.0);
  for (const auto& w : raw) ops.add_to(total, w.weight);
  for (auto& w : raw) w.weight = ops.div(w.weight, total);
  return raw;
}

ScalarJet glue_with_order(const CoverLevel& cover, const Vector& x, int order) {
  const int n = static_cast<int>(x.size());
  const JetOps ops{n, order};
  const double r = 0.5 * cover.radius;
  const auto ids = cover.centers.indices_within(x, BumpProfile::kSupport * r);
  if (ids.empty()) return ops.constant(0.0);
  ScalarJet sum = ops.constant(0.0);
  ScalarJet prod = ops.constant(1.0);
  for (std::size_t a : ids) {
    ScalarJet phi = ops.bump(x, cover.centers.point(a), r);
    if (phi.value == 0.0) continue;
    ops.add_to(sum, phi);
    ScalarJet one_minus = ops.constant(1.0);
    ops.add_to(one_minus, phi, -1.0);
    prod = ops.mul(prod, one_minus);
  }
  if (sum.value == 0.0) return ops.constant(0.0);
  ScalarJet denom = sum;
  ops.add_to(denom, prod);
  return ops.div(sum, denom);
}

std::vector<std::size_t> lexicographic_order(const PointSample& s, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> order = idx;
  const Matrix& p = s.points();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < p.rows(); ++c) {
      const double pa = p(c, static_cast<Eigen::Index>(a)), pb = p(c, static_cast<Eigen::Index>(b));
      if (pa != pb) return pa < pb;
    }
    return a < b;
  });
  return order;
}

}  // namespace

ScalarJet bump_jet(const Vector& x, const Vector& center, double radius) {
  return JetOps{static_cast<int>(x.size()), 2}.bump(x, center, radius);
}

std::vector<PartitionWeight> partition_weights(const CoverLevel& cover, const Vector& x) {
  return weights_with_order(cover, x, 2);
}

ScalarJet glue_weight(const CoverLevel& cover, const Vector& x) { return glue_with_order(cover, x, 2); }

int max_resolved_stage(int m, double h) {
  int i = 0;
  while (std::ldexp(1.0, -m * (i + 1)) >= 10.0 * h) ++i;
  return i;
}

CoverLevel build_cover_at_radius(const PointSample& s, int index, double radius, int k, int max_sheets,
                                 const CoverOptions& options, CertificateCache* cache) {
  const double floor = 10.0 * s.resolution();
  if (radius < floor && !options.allow_subresolution) {
    std::ostringstream os;
    os << "stage " << index << ": r = " << radius << " is below 10h = " << floor;
    throw ResolutionError(os.str());
  }
  CoverLevel cover;
  cover.index = index;
  cover.radius = radius;
  cover.certificate_radius = std::max(radius, floor);

  const auto domain = s.indices_within(Vector::Zero(s.dim()), options.domain_radius);
  if (domain.empty()) throw EmptySetError("build_cover: S misses the cover domain");
  std::vector<char> covered(s.size(), 0);
  const double cover_radius = options.cover_fraction * radius;
  for (std::size_t i : lexicographic_order(s, domain)) {
    if (covered[i]) continue;
    cover.center_sample_index.push_back(i);
    for (std::size_t j : s.indices_within(s.point(i), cover_radius)) covered[j] = 1;
  }
  Matrix centers(s.dim(), static_cast<Eigen::Index>(cover.center_sample_index.size()));
  for (std::size_t a = 0; a < cover.center_sample_index.size(); ++a) {
    centers.col(static_cast<Eigen::Index>(a)) = s.point(cover.center_sample_index[a]);
  }
  cover.centers = PointSample(std::move(centers), s.resolution());

  const std::size_t count = cover.size();
  cover.certificate_of_center.assign(count, 0);
  std::vector<char> assigned(count, 0);
  const double share = options.certificate_share * cover.certificate_radius;
  CertificateCache local;
  CertificateCache& store = cache ? *cache : local;
  for (std::size_t a = 0; a < count; ++a) {
    if (assigned[a]) continue;
    const std::size_t sample_index = cover.center_sample_index[a];
    const auto key = std::make_pair(sample_index, cover.certificate_radius);
    auto it = store.find(key);
    if (it == store.end()) {
      const Ball ball(s.point(sample_index), cover.certificate_radius);
      it = store.emplace(key, detect_splitting(s, ball, k, max_sheets, options.detect)).first;
    }
    const std::size_t cert_index = cover.certificates.size();
    cover.certificates.push_back(it->second);
    cover.certificate_of_center[a] = cert_index;
    assigned[a] = 1;
    if (share > 0.0) {
      for (std::size_t b : cover.centers.indices_within(cover.centers.point(a), share)) {
        if (!assigned[b]) {
          assigned[b] = 1;
          cover.certificate_of_center[b] = cert_index;
        }
      }
    }
  }
  return cover;
}

CoverLevel build_cover(const PointSample& s, int i, int m, int k, int max_sheets, const CoverOptions& options,
                       CertificateCache* cache) {
  return build_cover_at_radius(s, i, std::ldexp(1.0, -m * i), k, max_sheets, options, cache);
}

MapPyramid::MapPyramid(PyramidParams params, Matrix rotation) : params_(params), rotation_(std::move(rotation)) {
  const Eigen::Index n = params_.n;
  if (rotation_.rows() != n || rotation_.cols() != n) throw DimensionMismatchError("rotation must be n x n");
  if ((rotation_ * rotation_.transpose() - Matrix::Identity(n, n)).norm() > kOrthonormalityTolerance) {
    throw InvalidArgumentError("rotation is not orthogonal");
  }
}

double MapPyramid::radius(int i) const { return std::ldexp(1.0, -params_.m * i); }

MapPyramid MapPyramid::with_stage(std::shared_ptr<const StageData> stage) const {
  MapPyramid out = *this;
  out.stages_.push_back(std::move(stage));
  return out;
}

Jet2 MapPyramid::evaluate(int i, const Vector& x, JetOrder order) const {
  if (i < 0 || i > built_stages()) throw InvalidArgumentError("evaluate: stage " + std::to_string(i) + " not built");
  const int n = params_.n, k = params_.k;
  if (x.size() != n) throw DimensionMismatchError("evaluate: point dimension mismatch");
  const int ord = static_cast<int>(order);
  const Matrix f0 = rotation_.topRows(k);
  Jet2 jet;
  jet.value = f0 * x;
  if (ord >= 1) jet.jacobian = f0;
  if (ord >= 2) jet.hessian.assign(static_cast<std::size_t>(k), Matrix::Zero(n, n));

  for (int s = 1; s <= i; ++s) {
    const StageData& st = *stages_[static_cast<std::size_t>(s - 1)];
    const ScalarJet chi = glue_with_order(st.cover, x, ord);
    if (chi.value == 0.0 && (ord == 0 || (chi.grad.isZero(0.0) && (ord < 2 || chi.hess.isZero(0.0))))) continue;

    // Psi jet.
    Vector psi_v = Vector::Zero(k);
    Matrix psi_j;
    std::vector<Matrix> psi_h;
    if (ord >= 1) psi_j = Matrix::Zero(k, n);
    if (ord >= 2) psi_h.assign(static_cast<std::size_t>(k), Matrix::Zero(n, n));
    for (const auto& w : weights_with_order(st.cover, x, ord)) {
      const Matrix& ma = st.maps[w.center];
      const Vector fa = st.anchors.col(static_cast<Eigen::Index>(w.center)) +
                        ma * (x - st.cover.centers.point(w.center));
      psi_v += w.weight.value * fa;
      if (ord >= 1) psi_j += fa * w.weight.grad.transpose() + w.weight.value * ma;
      if (ord >= 2) {
        for (int c = 0; c < k; ++c) {
          const Vector mc = ma.row(c).transpose();
          psi_h[static_cast<std::size_t>(c)] +=
              fa(c) * w.weight.hess + w.weight.grad * mc.transpose() + mc * w.weight.grad.transpose();
        }
      }
    }

    const Vector e = psi_v - jet.value;
    Matrix ej;
    if (ord >= 1) ej = psi_j - jet.jacobian;
    if (ord >= 2) {
      for (int c = 0; c < k; ++c) {
        const std::size_t sc = static_cast<std::size_t>(c);
        const Matrix eh = psi_h[sc] - jet.hessian[sc];
        const Vector ec = ej.row(c).transpose();
        jet.hessian[sc] += e(c) * chi.hess + ec * chi.grad.transpose() + chi.grad * ec.transpose() + chi.value * eh;
      }
    }
    if (ord >= 1) jet.jacobian += e * chi.grad.transpose() + chi.value * ej;
    jet.value += chi.value * e;
  }
  return jet;
}

MapPyramid initialize_pyramid(const PointSample& s, const PyramidParams& params, const BuildOptions& options) {
  if (params.n != s.dim()) throw DimensionMismatchError("pyramid n differs from the sample dimension");
  if (params.k < 1 || params.k >= params.n) throw InvalidArgumentError("pyramid needs 1 <= k < n");
  if (params.m < 1) throw InvalidArgumentError("m must be at least 1");
  if (params.i_max < 1) throw InvalidArgumentError("i_max must be at least 1");
  const Ball top(Vector::Zero(params.n), 2.0);
  const SplittingCertificate cert = detect_splitting(s, top, params.k, params.max_sheets, options.top_detect);
  const int n = params.n, k = params.k;
  Matrix ref_top = Matrix::Zero(k, n);
  ref_top.leftCols(k) = Matrix::Identity(k, k);
  Matrix ref_bottom = Matrix::Zero(n - k, n);
  ref_bottom.rightCols(n - k) = Matrix::Identity(n - k, n - k);
  Matrix rotation(n, n);
  rotation.topRows(k) = align_frame(cert.direction, ref_top);
  rotation.bottomRows(n - k) = align_frame(orthogonal_complement(cert.direction), ref_bottom);
  PyramidParams p = params;
  p.h = s.resolution();
  return MapPyramid(p, rotation);
}

MapPyramid build_stage(const MapPyramid& pyramid, const PointSample& s, const BuildOptions& options,
                       CertificateCache* cache) {
  const auto& p = pyramid.params();
  const int stage = pyramid.built_stages() + 1;
  auto data = std::make_shared<StageData>();
  data->cover = build_cover(s, stage, p.m, p.k, p.max_sheets, options.cover, cache);
  const std::size_t count = data->cover.size();
  data->anchors.resize(p.k, static_cast<Eigen::Index>(count));
  data->maps.reserve(count);
  for (std::size_t a = 0; a < count; ++a) {
    const Vector xa = data->cover.centers.point(a);
    const Jet2 jet = pyramid.evaluate(stage - 1, xa, JetOrder::Jacobian);
    if (inverse_condition(jet.jacobian) <= kRankThreshold) {
      throw RankDeficientError("stage " + std::to_string(stage) + ": gradient of the previous stage is rank deficient");
    }
    data->anchors.col(static_cast<Eigen::Index>(a)) = jet.value;
    data->maps.push_back(jet.jacobian * data->cover.certificate(a).direction.projector());
  }
  return pyramid.with_stage(std::move(data));
}

MapPyramid build_pyramid(const PointSample& s, const PyramidParams& params, const BuildOptions& options) {
  MapPyramid pyramid = initialize_pyramid(s, params, options);
  CertificateCache cache;
  for (int i = 1; i <= params.i_max; ++i) pyramid = build_stage(pyramid, s, options, &cache);
  return pyramid;
}

std::vector<RegularityRow> regularity_profile(const MapPyramid& pyramid, int i, const std::vector<Vector>& probes,
                                              const PointSample& s, const DetectOptions& detect) {
  const auto& p = pyramid.params();
  const double r = pyramid.radius(i);
  const double cert_radius = i == 0 ? r : pyramid.stage(i).cover.certificate_radius;
  std::vector<RegularityRow> rows;
  for (const Vector& x : probes) {
    RegularityRow row;
    row.probe = x;
    const Jet2 jet = pyramid.evaluate(i, x, JetOrder::Hessian);
    const QrFactors qr = qr_decompose(jet.jacobian);
    const Matrix lower_inv = qr.lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(p.k, p.k));
    double sq = 0.0;
    for (int c = 0; c < p.k; ++c) {
      Matrix t = Matrix::Zero(p.n, p.n);
      for (int d = 0; d < p.k; ++d) t += lower_inv(c, d) * jet.hessian[static_cast<std::size_t>(d)];
      sq += t.squaredNorm();
    }
    row.regularity = std::sqrt(sq) * r;
    row.lower_norm = operator_norm(qr.lower);
    row.lower_inv_norm = operator_norm(lower_inv);
    const bool inside = i == 0 || !pyramid.stage(i).cover.centers.indices_within(x, 0.4 * r).empty();
    if (inside && !s.indices_within(x, cert_radius).empty()) {
      const SplittingCertificate cert = detect_splitting(s, Ball(x, cert_radius), p.k, p.max_sheets, detect);
      row.kernel_gap = subspace_distance(LinearSubspace::from_frame(qr.frame), cert.direction);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const MapPyramid& pyramid) {
  const auto& p = pyramid.params();
  Json stages = Json::array();
  for (int i = 1; i <= pyramid.built_stages(); ++i) {
    const StageData& st = pyramid.stage(i);
    Json centers = Json::array(), anchors = Json::array(), maps = Json::array();
    for (std::size_t a = 0; a < st.cover.size(); ++a) {
      centers.push_back(to_json(st.cover.centers.point(a)));
      anchors.push_back(to_json(Vector(st.anchors.col(static_cast<Eigen::Index>(a)))));
      maps.push_back(to_json(st.maps[a]));
    }
    stages.push_back(Json{{"index", i},
                          {"radius", st.cover.radius},
                          {"certificate_radius", st.cover.certificate_radius},
                          {"centers", std::move(centers)},
                          {"anchors", std::move(anchors)},
                          {"maps", std::move(maps)}});
  }
  return Json{{"parameters",
               {{"k", p.k},
                {"n", p.n},
                {"N", p.max_sheets},
                {"m", p.m},
                {"delta_nominal", p.delta_nominal},
                {"alpha", p.alpha},
                {"i_max", p.i_max},
                {"h", p.h}}},
              {"rotation", to_json(pyramid.rotation())},
              {"stages", std::move(stages)}};
}

MapPyramid pyramid_from_json(const Json& j) {
  const Json& jp = j.at("parameters");
  PyramidParams p;
  p.k = jp.at("k").get<int>();
  p.n = jp.at("n").get<int>();
  p.max_sheets = jp.at("N").get<int>();
  p.m = jp.at("m").get<int>();
  p.delta_nominal = jp.at("delta_nominal").get<double>();
  p.alpha = jp.at("alpha").get<double>();
  p.i_max = jp.at("i_max").get<int>();
  p.h = jp.at("h").get<double>();
  MapPyramid pyramid(p, matrix_from_json(j.at("rotation")));
  for (const Json& js : j.at("stages")) {
    auto data = std::make_shared<StageData>();
    CoverLevel& cover = data->cover;
    cover.index = js.at("index").get<int>();
    cover.radius = js.at("radius").get<double>();
    cover.certificate_radius = js.at("certificate_radius").get<double>();
    const Json& jc = js.at("centers");
    Matrix centers(p.n, static_cast<Eigen::Index>(jc.size()));
    data->anchors.resize(p.k, static_cast<Eigen::Index>(jc.size()));
    for (std::size_t a = 0; a < jc.size(); ++a) {
      centers.col(static_cast<Eigen::Index>(a)) = vector_from_json(jc[a]);
      data->anchors.col(static_cast<Eigen::Index>(a)) = vector_from_json(js.at("anchors")[a]);
      data->maps.push_back(matrix_from_json(js.at("maps")[a]));
      cover.center_sample_index.push_back(a);
    }
    cover.centers = PointSample(std::move(centers), p.h);
    if (cover.index != pyramid.built_stages() + 1) throw InvalidArgumentError("pyramid JSON: stages out of order");
    pyramid = pyramid.with_stage(std::move(data));
  }
  return pyramid;
}

}  // namespace reifsplit
