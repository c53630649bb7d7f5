#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reifsplit/error.hpp"
#include "reifsplit/examples.hpp"
#include "reifsplit/holder.hpp"
#include "reifsplit/io.hpp"
#include "reifsplit/linalg.hpp"
#include "reifsplit/map_builder.hpp"
#include "reifsplit/point_sample.hpp"
#include "reifsplit/splitting.hpp"

namespace py = pybind11;
using namespace reifsplit;

namespace {

// Rows of the numpy array are points.
PointSample sample_from_rows(const Matrix& rows, double h) { return PointSample(rows.transpose(), h); }

}  // namespace

PYBIND11_MODULE(_reifsplit, m) {
  m.doc() = "Splitting detection, map pyramids and biHolder certification for multi-sheeted point sets";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<RankDeficientError>(m, "RankDeficientError", base.ptr());
  py::register_exception<DimensionMismatchError>(m, "DimensionMismatchError", base.ptr());
  py::register_exception<EmptySetError>(m, "EmptySetError", base.ptr());
  py::register_exception<ResolutionError>(m, "ResolutionError", base.ptr());
  py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", base.ptr());
  py::register_exception<InconsistentCertificateError>(m, "InconsistentCertificateError", base.ptr());

  py::class_<Ball>(m, "Ball")
      .def(py::init<Vector, double>(), py::arg("center"), py::arg("radius"))
      .def_readonly("center", &Ball::center)
      .def_readonly("radius", &Ball::radius)
      .def("contains", &Ball::contains);

  py::class_<PointSample>(m, "PointSample")
      .def(py::init(&sample_from_rows), py::arg("points"), py::arg("h"),
           "points: array of shape (count, n), one point per row")
      .def_property_readonly("dim", &PointSample::dim)
      .def_property_readonly("resolution", &PointSample::resolution)
      .def("__len__", &PointSample::size)
      .def("points", [](const PointSample& s) { return Matrix(s.points().transpose()); })
      .def("distance_to", &PointSample::distance_to)
      .def("indices_within", py::overload_cast<const Vector&, double>(&PointSample::indices_within, py::const_));

  m.def("hausdorff_distance", &hausdorff_distance);
  m.def("local_hausdorff", &local_hausdorff);

  m.def("qr_decompose", [](const Matrix& a) {
    QrFactors f = qr_decompose(a);
    return py::make_tuple(f.lower, f.frame);
  });
  m.def("qr_perturbation_gap", &qr_perturbation_gap);

  py::class_<LinearSubspace>(m, "LinearSubspace")
      .def_static("from_spanning_rows", &LinearSubspace::from_spanning_rows)
      .def_static("coordinate", &LinearSubspace::coordinate)
      .def_property_readonly("dim", &LinearSubspace::dim)
      .def_property_readonly("ambient_dim", &LinearSubspace::ambient_dim)
      .def_property_readonly("frame", &LinearSubspace::frame)
      .def("projector", &LinearSubspace::projector);
  m.def("subspace_distance", &subspace_distance);
  m.def("orthogonal_complement", &orthogonal_complement);

  py::class_<SplittingCertificate>(m, "SplittingCertificate")
      .def_readonly("ball", &SplittingCertificate::ball)
      .def_readonly("direction", &SplittingCertificate::direction)
      .def_readonly("offsets", &SplittingCertificate::offsets)
      .def_readonly("defect", &SplittingCertificate::defect)
      .def_readonly("offset_diameter", &SplittingCertificate::offset_diameter)
      .def_readonly("converged", &SplittingCertificate::converged)
      .def("to_json", [](const SplittingCertificate& c) { return to_json(c).dump(); });
  m.def("detect_splitting",
        [](const PointSample& s, const Ball& ball, int k, int n_sheets) { return detect_splitting(s, ball, k, n_sheets); },
        py::arg("sample"), py::arg("ball"), py::arg("k"), py::arg("max_sheets"));
  m.def("uniqueness_gap", &uniqueness_gap);

  py::class_<ExampleSpec>(m, "ExampleSpec")
      .def(py::init([](const std::string& kind, double delta, double h, double alpha_twist, int n, int k, bool flat) {
             ExampleSpec spec;
             spec.kind = example_kind_from_string(kind);
             spec.delta = delta;
             spec.h = h;
             spec.alpha_twist = alpha_twist;
             spec.n = n;
             spec.k = k;
             spec.flat = flat;
             if (spec.kind == ExampleKind::Twist) {
               spec.n = 3;
               spec.k = 2;
             }
             validate(spec);
             return spec;
           }),
           py::arg("kind"), py::arg("delta") = 0.01, py::arg("h") = 5e-4, py::arg("alpha_twist") = 1.5 * M_PI,
           py::arg("n") = 2, py::arg("k") = 1, py::arg("flat") = false)
      .def_property_readonly("kind", [](const ExampleSpec& s) { return to_string(s.kind); })
      .def_readonly("delta", &ExampleSpec::delta)
      .def_readonly("h", &ExampleSpec::h)
      .def_readonly("n", &ExampleSpec::n)
      .def_readonly("k", &ExampleSpec::k);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def_property_readonly("k", &GroundTruth::k)
      .def_property_readonly("n", &GroundTruth::n)
      .def_property_readonly("max_sheets", &GroundTruth::max_sheets)
      .def("sheet_values", &GroundTruth::sheet_values)
      .def("offsets_at", &GroundTruth::offsets_at)
      .def("metadata", [](const GroundTruth& g) { return g.metadata().dump(); });
  m.def("generate", &generate);
  m.def("ground_truth_splitting", &ground_truth_splitting);

  py::class_<PyramidParams>(m, "PyramidParams")
      .def(py::init<>())
      .def_readwrite("k", &PyramidParams::k)
      .def_readwrite("n", &PyramidParams::n)
      .def_readwrite("max_sheets", &PyramidParams::max_sheets)
      .def_readwrite("m", &PyramidParams::m)
      .def_readwrite("delta_nominal", &PyramidParams::delta_nominal)
      .def_readwrite("alpha", &PyramidParams::alpha)
      .def_readwrite("i_max", &PyramidParams::i_max)
      .def_readwrite("h", &PyramidParams::h);

  py::class_<MapPyramid>(m, "MapPyramid")
      .def_property_readonly("params", &MapPyramid::params)
      .def_property_readonly("rotation", &MapPyramid::rotation)
      .def_property_readonly("built_stages", &MapPyramid::built_stages)
      .def("radius", &MapPyramid::radius)
      .def("value", py::overload_cast<int, const Vector&>(&MapPyramid::value, py::const_))
      .def("jacobian", [](const MapPyramid& p, int i, const Vector& x) {
        return p.evaluate(i, x, JetOrder::Jacobian).jacobian;
      })
      .def("to_json", [](const MapPyramid& p) { return to_json(p).dump(); })
      .def_static("from_json", [](const std::string& text) { return pyramid_from_json(Json::parse(text)); });
  m.def(
      "build_pyramid",
      [](const PointSample& s, const PyramidParams& params, bool allow_subresolution) {
        BuildOptions options;
        options.cover.allow_subresolution = allow_subresolution;
        return build_pyramid(s, params, options);
      },
      py::arg("sample"), py::arg("params"), py::arg("allow_subresolution") = false);
  m.def("max_resolved_stage", &max_resolved_stage);

  py::class_<Fiber>(m, "Fiber")
      .def_readonly("target", &Fiber::target)
      .def_readonly("members", &Fiber::members)
      .def_readonly("residuals", &Fiber::residuals)
      .def("__len__", &Fiber::size);
  py::class_<FiberIndex>(m, "FiberIndex")
      .def(py::init([](const MapPyramid& p, const PointSample& s) { return FiberIndex(p, s); }))
      .def_property_readonly("tolerance", &FiberIndex::tolerance)
      .def("fiber", &FiberIndex::fiber)
      .def("member_points", [](const FiberIndex& idx, const Fiber& f) { return Matrix(idx.member_points(f).transpose()); });
  m.def(
      "certify_biholder",
      [](const FiberIndex& index, int pairs, std::uint64_t seed, double alpha) {
        const int k = index.pyramid().params().k;
        return to_json(certify_biholder(index, random_parameter_pairs(k, pairs, seed), alpha)).dump();
      },
      py::arg("index"), py::arg("pairs"), py::arg("seed"), py::arg("alpha"),
      "HolderReport as a JSON string");
  m.def("select_doubling_chain", &select_doubling_chain);
  m.def("is_doubling_chain", &is_doubling_chain);
}
