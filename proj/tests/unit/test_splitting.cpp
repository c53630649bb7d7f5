#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "../common/oracle.hpp"
#include "helpers.hpp"
#include "reifsplit/error.hpp"
#include "reifsplit/examples.hpp"
#include "reifsplit/splitting.hpp"

using namespace reifsplit;
using namespace testing_helpers;

namespace {

struct Fixture {
  ExampleSpec spec;
  PointSample sample;
  GroundTruth truth;
};

Fixture make_fixture(ExampleKind kind, double delta, double h) {
  ExampleSpec spec;
  spec.kind = kind;
  spec.delta = delta;
  spec.h = h;
  if (kind == ExampleKind::Twist) {
    spec.n = 3;
    spec.k = 2;
  }
  auto [s, gt] = generate(spec);
  return {spec, s, gt};
}

const Fixture& merging() {
  static const Fixture f = make_fixture(ExampleKind::MergingLines, 0.01, 5e-4);
  return f;
}

const Fixture& single_graph() {
  static const Fixture f = make_fixture(ExampleKind::SingleGraph, 0.01, 1e-3);
  return f;
}

const Fixture& twist() {
  static const Fixture f = make_fixture(ExampleKind::Twist, 0.1, 0.01);
  return f;
}

const Fixture& cantor() {
  static const Fixture f = make_fixture(ExampleKind::CantorProduct, 0.01, 5e-4);
  return f;
}

// Balls centered on sample points with radius in [lo, hi] and |c| + r <= 1.99.
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

LinearSubspace x_axis(int n = 2) {
  Matrix f = Matrix::Zero(1, n);
  f(0, 0) = 1.0;
  return LinearSubspace::from_frame(f);
}

PointSample horizontal_lines(const std::vector<double>& heights, double h, double half_length = 2.0) {
  std::vector<Vector> pts;
  const int steps = static_cast<int>(std::ceil(half_length / h));
  for (double y : heights)
    for (int i = -steps; i <= steps; ++i) pts.push_back(vec({i * h, y}));
  return PointSample::from_rows(pts, h);
}

double normal_coordinate(const SplittingCertificate& cert, const Vector& o) {
  const Vector normal = vec({-cert.direction.frame()(0, 1), cert.direction.frame()(0, 0)});
  return normal.dot(o);
}

}  // namespace

TEST_SUITE("splitting-detect") {

TEST_CASE("single-graph balls split with one offset") {
  const Fixture& f = single_graph();
  for (const Ball& b : random_balls(f.sample, 30, 0.05, 0.4, 11)) {
    const auto cert = detect_splitting(f.sample, b, 1, 1);
    CHECK(cert.offsets.size() == 1);
    CHECK(cert.defect <= 0.02);
  }
}

TEST_CASE("merging-lines ball near the first merge") {
  const Fixture& f = merging();
  const Ball ball(vec({1.5, 0.0075}), 0.5);
  const auto cert = detect_splitting(f.sample, ball, 1, 3);
  // The optimum here uses two planes: the outer sheets differ by 1.5 delta at x = 1.5
  // and a two-plane cover already reaches the error floor.
  CHECK(cert.offsets.size() >= 2);
  CHECK(cert.offsets.size() <= 3);
  CHECK(subspace_distance(cert.direction, x_axis()) <= 0.05);
  CHECK(cert.defect <= 0.03);
  const auto opt = oracle::splitting_optimum(f.sample, ball, 3);
  CHECK(cert.defect <= opt.defect * 1.1 + 2.0 * f.spec.h / ball.radius);
  for (const Vector& o : cert.offsets) {
    CHECK(std::abs(cert.direction.frame().row(0).dot(o - ball.center)) <= 1e-9);
  }
}

TEST_CASE("single horizontal line is split exactly") {
  const double h = 1e-3;
  const auto s = horizontal_lines({0.3}, h);
  const Ball ball(vec({0.2, 0.3}), 0.5);
  const auto cert = detect_splitting(s, ball, 1, 3);
  CHECK(subspace_distance(cert.direction, x_axis()) <= 1e-9);
  REQUIRE(cert.offsets.size() == 1);
  CHECK(cert.offsets[0](1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(cert.defect <= 2.0 * h / ball.radius);
}

TEST_CASE("detection rejects bad inputs") {
  const Fixture& f = merging();
  CHECK_THROWS_AS(detect_splitting(f.sample, Ball(vec({5.0, 5.0}), 0.1), 1, 3), EmptySetError);
  CHECK_THROWS_AS(detect_splitting(f.sample, Ball(vec({0.0, 0.0}), 0.1), 2, 3), InvalidArgumentError);
  CHECK_THROWS_AS(detect_splitting(f.sample, Ball(vec({0.0, 0.0}), 0.1), 1, 0), InvalidArgumentError);
  CHECK_THROWS_AS(detect_splitting(f.sample, Ball(vec({0.0, 0.0, 0.0}), 0.1), 1, 3), DimensionMismatchError);
}

TEST_CASE("reduction removes a far irrelevant offset") {
  const double h = 1e-3;
  const auto s = horizontal_lines({0.0}, h);
  const Ball ball(vec({0.0, 0.0}), 0.4);
  const auto clean = make_certificate(s, ball, x_axis(), {vec({0.0, 0.0})});
  auto polluted = make_certificate(s, ball, x_axis(), {vec({0.0, 0.0}), vec({0.0, 1.1 * ball.radius})});
  // The far plane misses the ball entirely, so the defect is still set by the real line.
  CHECK(polluted.defect == doctest::Approx(clean.defect).epsilon(1e-12));
  const auto reduced = reduce_splitting_set(s, polluted);
  REQUIRE(reduced.offsets.size() == 1);
  CHECK(reduced.offsets[0].norm() <= 1e-12);
  CHECK(reduced.defect == doctest::Approx(clean.defect).epsilon(1e-12));
  const auto again = reduce_splitting_set(s, reduced);
  CHECK(again.offsets.size() == reduced.offsets.size());
  CHECK(again.defect == reduced.defect);
}

TEST_CASE("reduction drops every offset of an inconsistent certificate") {
  const auto s = horizontal_lines({0.0}, 1e-3);
  SplittingCertificate cert = make_certificate(s, Ball(vec({0.0, 0.0}), 0.4), x_axis(), {vec({0.0, 0.0})});
  cert.offsets = {vec({0.0, 1.0})};
  cert.defect = 0.01;
  CHECK_THROWS_AS(reduce_splitting_set(s, cert), InconsistentCertificateError);
}

TEST_CASE("detected merging-lines certificates are reduction fixpoints") {
  const Fixture& f = merging();
  for (const Ball& b : random_balls(f.sample, 100, 0.05, 0.4, 23)) {
    const auto cert = detect_splitting(f.sample, b, 1, 3);
    const auto reduced = reduce_splitting_set(f.sample, cert);
    CHECK(reduced.offsets.size() == cert.offsets.size());
    // Sandwich: retained offsets sit within (1 + defect) r of the center.
    for (const Vector& o : reduced.offsets) CHECK((o - b.center).norm() <= (1.0 + reduced.defect) * b.radius);
  }
}

TEST_CASE("defect of an exact plane union is at the sampling floor") {
  const double h = 1e-3;
  const auto s = horizontal_lines({-0.1, 0.05, 0.2}, h);
  for (double r : {0.1, 0.3, 0.6}) {
    const Ball ball(vec({0.1, 0.0}), r);
    std::vector<Vector> offsets;
    for (double y : {-0.1, 0.05, 0.2})
      if (std::abs(y) <= r) offsets.push_back(vec({0.1, y}));
    const auto cert = make_certificate(s, ball, x_axis(), offsets);
    CHECK(cert.defect <= 2.0 * h / r);
  }
}

TEST_CASE("ground-truth merging-lines certificates meet delta") {
  const Fixture& f = merging();
  for (const Ball& b : random_balls(f.sample, 100, 0.05, 0.4, 31)) {
    const auto gt = ground_truth_splitting(f.truth, b);
    CHECK(measure_defect(f.sample, gt) <= f.spec.delta + 2.0 * f.spec.h / b.radius);
  }
}

TEST_CASE("tilting the direction by 0.1 rad raises the defect") {
  const Fixture& f = single_graph();
  for (const Ball& b : random_balls(f.sample, 20, 0.2, 0.4, 37)) {
    const auto cert = detect_splitting(f.sample, b, 1, 1);
    const double t = std::atan2(cert.direction.frame()(0, 1), cert.direction.frame()(0, 0)) + 0.1;
    Matrix frame(1, 2);
    frame << std::cos(t), std::sin(t);
    const auto tilted = make_certificate(f.sample, b, LinearSubspace::from_frame(frame), cert.offsets);
    CHECK(tilted.defect - cert.defect >= 0.05);
  }
}

TEST_CASE("identical certificates compare at zero") {
  const Fixture& f = merging();
  const auto cert = detect_splitting(f.sample, Ball(vec({-0.5, 0.0}), 0.3), 1, 3);
  CHECK(compare_directions(cert, cert) == 0.0);
  const auto gap = uniqueness_gap(f.sample, cert.ball, cert, cert);
  CHECK(gap.first == 0.0);
  CHECK(gap.second == 0.0);
}

TEST_CASE("nested half-scale merging-lines balls agree within 10 delta_eff") {
  const Fixture& f = merging();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (const Ball& outer : random_balls(f.sample, 100, 0.5, 0.5, 43)) {
    // Inner center: a sample point within r/4 of the outer center keeps B_{r/2} inside.
    const auto idx = f.sample.indices_within(outer.center, 0.25);
    const Vector c = f.sample.point(idx[static_cast<std::size_t>((unit(rng) + 1.0) * 0.5 * (idx.size() - 1))]);
    const Ball inner(c, 0.25);
    const auto a = detect_splitting(f.sample, outer, 1, 3);
    const auto b = detect_splitting(f.sample, inner, 1, 3);
    const double eff = std::max(a.defect, b.defect);
    CHECK(compare_directions(a, b) <= 10.0 * eff);
    worst = std::max(worst, compare_directions(a, b) / eff);
  }
  MESSAGE("max nested direction ratio " << worst);
}

TEST_CASE("overlapping equal-radius twist balls agree within 40 delta_eff") {
  const Fixture& f = twist();
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> ur(0.2, 0.4);
  std::uniform_int_distribution<std::size_t> pick(0, f.sample.size() - 1);
  int done = 0;
  double worst = 0.0;
  while (done < 100) {
    const double r = ur(rng);
    const Vector c1 = f.sample.point(pick(rng));
    if (c1.norm() + r > 1.99) continue;
    const auto near = f.sample.indices_within(c1, r);
    const Vector c2 = f.sample.point(near[pick(rng) % near.size()]);
    if (c2.norm() + r > 1.99) continue;
    const auto a = detect_splitting(f.sample, Ball(c1, r), 2, 3);
    const auto b = detect_splitting(f.sample, Ball(c2, r), 2, 3);
    const double eff = std::max(a.defect, b.defect);
    CHECK(compare_directions(a, b) <= 40.0 * eff);
    worst = std::max(worst, compare_directions(a, b) / eff);
    ++done;
  }
  MESSAGE("max overlapping direction ratio " << worst);
}

TEST_CASE("census on single-graph finds no bad scales") {
  const Fixture& f = single_graph();
  const auto sampler = window_sampler(f.spec);
  const auto chain = descending_chain(sampler, vec({0.1, 0.0}), 0.5, 2, 5, 3);
  const auto report = census_bad_scales(sampler, chain, 1, 1, 2);
  CHECK(report.count == 0);
  CHECK(report.chain.size() == chain.size());
}

TEST_CASE("census along a chain into the merge point x = 1.5") {
  const Fixture& f = merging();
  std::vector<Ball> chain;
  for (int i = 0; i <= 5; ++i) chain.emplace_back(vec({1.5, 0.0}), 0.5 * std::ldexp(1.0, -4 * i));
  const auto report = census_bad_scales(window_sampler(f.spec), chain, 1, 3, 4);
  CHECK(report.count <= 3);
  CHECK(report.offset_diameters.size() == chain.size());
}

TEST_CASE("census on cantor-product random chains") {
  const Fixture& f = cantor();
  const auto sampler = window_sampler(f.spec);
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<std::size_t> pick(0, f.sample.size() - 1);
  for (int t = 0; t < 50; ++t) {
    Vector start = f.sample.point(pick(rng));
    if (start.norm() > 1.4) {
      --t;
      continue;
    }
    const auto chain = descending_chain(sampler, start, 0.5, 2, 5, 100 + t);
    const auto report = census_bad_scales(sampler, chain, 1, 2, 2);
    CHECK(report.count <= 2);
  }
}

TEST_CASE("census rejects a chain that is not nested") {
  const Fixture& f = merging();
  std::vector<Ball> chain{Ball(vec({0.0, 0.0}), 0.5), Ball(vec({0.45, 0.0}), 0.25)};
  CHECK_THROWS_AS(census_bad_scales(f.sample, chain, 1, 3, 1), InvalidArgumentError);
}

TEST_CASE("detected and ground-truth certificates satisfy the uniqueness bounds") {
  const Fixture& f = merging();
  for (const Ball& b : random_balls(f.sample, 100, 0.05, 0.4, 59)) {
    const auto det = detect_splitting(f.sample, b, 1, 3);
    const auto gt = ground_truth_splitting(f.truth, b);
    const double eff = std::max(det.defect, gt.defect);
    const auto [dir, off] = uniqueness_gap(f.sample, b, det, gt);
    CHECK(dir <= 5.0 * eff);
    CHECK(off <= 7.0 * eff * b.radius);
  }
}

TEST_CASE("two detection paths on twist satisfy the uniqueness bounds") {
  const Fixture& f = twist();
  DetectOptions linkage;
  linkage.exact_offsets = false;
  for (const Ball& b : random_balls(f.sample, 50, 0.2, 0.4, 61)) {
    const auto a = detect_splitting(f.sample, b, 2, 3);
    const auto c = detect_splitting(f.sample, b, 2, 3, linkage);
    const double eff = std::max(a.defect, c.defect);
    const auto [dir, off] = uniqueness_gap(f.sample, b, a, c);
    CHECK(dir <= 5.0 * eff);
    CHECK(off <= 7.0 * eff * b.radius);
  }
}

TEST_CASE("uniqueness gap rejects certificates of another ball") {
  const Fixture& f = merging();
  const auto a = detect_splitting(f.sample, Ball(vec({-0.5, 0.0}), 0.3), 1, 3);
  const auto b = detect_splitting(f.sample, Ball(vec({-0.4, 0.0}), 0.3), 1, 3);
  CHECK_THROWS_AS(uniqueness_gap(f.sample, a.ball, a, b), InvalidArgumentError);
}

TEST_CASE("offsets of a reused top certificate are nested along chains") {
  const Fixture& f = merging();
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<std::size_t> pick(0, f.sample.size() - 1);
  for (int t = 0; t < 20; ++t) {
    const Vector start = f.sample.point(pick(rng));
    if (start.norm() > 1.4) {
      --t;
      continue;
    }
    const auto chain = descending_chain(f.sample, start, 0.5, 1, 4, 200 + t);
    const auto top = reduce_splitting_set(f.sample, detect_splitting(f.sample, chain[0], 1, 3));
    std::vector<double> previous;
    for (const Vector& o : top.offsets) previous.push_back(normal_coordinate(top, o));
    for (std::size_t i = 1; i < chain.size(); ++i) {
      const auto reused = reduce_splitting_set(f.sample, make_certificate(f.sample, chain[i], top.direction, top.offsets));
      std::vector<double> current;
      for (const Vector& o : reused.offsets) current.push_back(normal_coordinate(reused, o));
      for (double q : current) {
        const bool found = std::any_of(previous.begin(), previous.end(), [&](double p) { return std::abs(p - q) <= 1e-9; });
        CHECK(found);
      }
      previous = current;
    }
  }
}

TEST_CASE("detection matches the brute-force optimum") {
  for (const Fixture* f : {&merging(), &single_graph(), &cantor()}) {
    const int sheets = f->truth.max_sheets();
    for (const Ball& b : random_balls(f->sample, 8, 0.05, 0.4, 71)) {
      const auto cert = detect_splitting(f->sample, b, 1, sheets);
      const auto opt = oracle::splitting_optimum(f->sample, b, sheets);
      CHECK(std::abs(cert.defect - opt.defect) <= 2.0 * f->spec.h / b.radius + 0.1 * opt.defect);
    }
  }
}

TEST_CASE("certificate JSON round trip") {
  const Fixture& f = merging();
  const auto cert = detect_splitting(f.sample, Ball(vec({1.5, 0.0}), 0.3), 1, 3);
  const auto back = certificate_from_json(to_json(cert));
  CHECK(back.offsets.size() == cert.offsets.size());
  CHECK(back.defect == cert.defect);
  CHECK(subspace_distance(back.direction, cert.direction) <= 1e-12);
  CHECK((back.ball.center - cert.ball.center).norm() == 0.0);
}

}
