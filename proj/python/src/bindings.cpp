// Python module anosov_lab._core. Results cross the boundary as JSON text.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anosov/pipeline.hpp"
#include "anosov/report.hpp"
#include "anosov/sasaki.hpp"
#include "anosov/spectrum.hpp"

namespace py = pybind11;
using namespace anosov;

namespace {

SurfaceModel build_model(const std::string& kind, double c, double eps) {
  if (kind == "flat") return SurfaceModel::flat();
  if (kind == "hyperbolic") return SurfaceModel::hyperbolic(c);
  if (kind == "modular") return SurfaceModel::modular();
  if (kind == "perturbed") return SurfaceModel::perturbed(c, eps);
  throw InvalidArgument("unknown model kind '" + kind + "'");
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Geodesic flow entropy and Lyapunov laboratory";

  static py::exception<ScenarioError> scenario_error(mod, "ScenarioError", PyExc_ValueError);
  py::register_exception<NumericalError>(mod, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<DomainError>(mod, "DomainError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ScenarioError& e) {
      py::object err = py::reinterpret_borrow<py::object>(scenario_error.ptr())(e.what());
      err.attr("line") = e.line();
      err.attr("detail") = e.message();
      PyErr_SetObject(scenario_error.ptr(), err.ptr());
    }
  });

  py::class_<SurfaceModel>(mod, "SurfaceModel")
      .def(py::init(&build_model), py::arg("kind"), py::arg("c") = 1.0, py::arg("eps") = 0.0)
      .def_property_readonly("name", &SurfaceModel::name)
      .def_property_readonly("curvature_bounds", &SurfaceModel::curvature_bounds)
      .def("gaussian_curvature",
           [](const SurfaceModel& m, double x, double y) { return gaussian_curvature(m, Vec2(x, y)); })
      .def("to_json", [](const SurfaceModel& m) { return to_json(m).dump(); })
      .def("__repr__", [](const SurfaceModel& m) { return "SurfaceModel(" + m.name() + ")"; });

  mod.def(
      "lyapunov_spectrum_json",
      [](const SurfaceModel& m, double x, double y, double angle, double T, double renorm_dt) {
        py::gil_scoped_release nogil;
        return to_json(lyapunov_spectrum(m, make_state(m, Vec2(x, y), angle), T, renorm_dt)).dump();
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("angle"), py::arg("T"), py::arg("renorm_dt") = 1.0);

  mod.def(
      "sasaki_sectional_frame",
      [](const SurfaceModel& m, double x, double y, double angle, std::array<double, 3> a, std::array<double, 3> b) {
        auto s = make_state(m, Vec2(x, y), angle);
        return sasaki_sectional(m, s, from_frame(s, Vec3(a[0], a[1], a[2])), from_frame(s, Vec3(b[0], b[1], b[2])));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("angle"), py::arg("a"), py::arg("b"));

  mod.def(
      "exp_bound_radius",
      [](const SurfaceModel& m, double x, double y, double angle, double wx, double wy, double bound,
         double t_max) {
        auto s = make_state(m, Vec2(x, y), angle);
        Vec2 w(wx, wy);
        return exp_bound_radius(m, s, w / g_norm(m, s.base, w), bound, t_max);
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("angle"), py::arg("wx"), py::arg("wy"),
      py::arg("bound") = 2.5, py::arg("t_max") = 4.0);

  mod.def("validate_scenario", [](const std::string& text) { parse_scenario(text); }, py::arg("text"));

  mod.def(
      "run_scenario",
      [](const std::string& text, std::optional<std::uint64_t> seed, int threads) {
        Scenario sc = parse_scenario(text);
        if (seed) sc.seed = *seed;
        RunResult r;
        {
          py::gil_scoped_release nogil;
          r = run_scenario(sc, {threads, {}});
        }
        py::dict out;
        out["exit"] = static_cast<int>(r.exit);
        out["stage"] = r.stage;
        out["message"] = r.message;
        py::list arts;
        for (const auto& a : r.artifacts) arts.append(py::make_tuple(a.name, py::bytes(a.content)));
        out["artifacts"] = arts;
        return out;
      },
      py::arg("text"), py::arg("seed") = py::none(), py::arg("threads") = 1);

  mod.def("sha256_hex", [](py::bytes b) { return sha256_hex(std::string(b)); }, py::arg("data"));
}
