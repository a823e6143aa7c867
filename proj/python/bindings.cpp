#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <tuple>

#include "cwlaser/error.hpp"
#include "cwlaser/lasersim.hpp"
#include "cwlaser/omega.hpp"
#include "cwlaser/optimizer.hpp"
#include "cwlaser/params.hpp"
#include "cwlaser/values.hpp"

namespace py = pybind11;
using namespace cwl;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bounds on the matrix multiplication exponent from laser-method parameter files";

  static py::exception<Error> py_error(m, "CwlError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py_error;
      PyErr_SetObject(err.ptr(), py::make_tuple(e.what(), error_kind_name(e.kind())).ptr());
    }
  });

  py::class_<Component>(m, "Component")
      .def(py::init([](int i, int j, int k, int level) { return Component{i, j, k, level}; }), py::arg("i"),
           py::arg("j"), py::arg("k"), py::arg("level"))
      .def_readonly("i", &Component::i)
      .def_readonly("j", &Component::j)
      .def_readonly("k", &Component::k)
      .def_readonly("level", &Component::level)
      .def("valid", &Component::valid)
      .def("__repr__", [](const Component& c) {
        return "Component(" + std::to_string(c.i) + ", " + std::to_string(c.j) + ", " + std::to_string(c.k) +
               ", level=" + std::to_string(c.level) + ")";
      });

  py::class_<OmegaResult>(m, "OmegaResult")
      .def_readonly("tau_star", &OmegaResult::tau_star)
      .def_readonly("omega_bound", &OmegaResult::omega_bound)
      .def_readonly("q", &OmegaResult::q)
      .def_readonly("power", &OmegaResult::power)
      .def_readonly("log2_value", &OmegaResult::log2_value)
      .def_readonly("log2_target", &OmegaResult::log2_target)
      .def_readonly("probes", &OmegaResult::probes);

  py::class_<VerifyReport>(m, "VerifyReport")
      .def_readonly("tau", &VerifyReport::tau)
      .def_readonly("log2_ax", &VerifyReport::log2_ax)
      .def_readonly("log2_ay", &VerifyReport::log2_ay)
      .def_readonly("log2_az", &VerifyReport::log2_az)
      .def_readonly("log2_phat", &VerifyReport::log2_phat)
      .def_readonly("hash_loss", &VerifyReport::hash_loss)
      .def_readonly("log2_vhat", &VerifyReport::log2_vhat)
      .def_readonly("log2_bound", &VerifyReport::log2_bound)
      .def_readonly("constraint_ok", &VerifyReport::constraint_ok)
      .def_readonly("log2_slack", &VerifyReport::log2_slack)
      .def_readonly("notes", &VerifyReport::notes);

  py::class_<ParamFile>(m, "ParamFile")
      .def_readonly("q", &ParamFile::q)
      .def_readonly("level", &ParamFile::level)
      .def_property_readonly("mode", [](const ParamFile& pf) { return std::string(mode_name(pf.mode)); })
      .def_readonly("source_digest", &ParamFile::source_digest)
      .def("dump", &dump_params);

  m.def("load_params", &load_params, py::arg("path"));
  m.def("parse_params", &parse_params, py::arg("text"), py::arg("source") = "<string>");

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init<ParamFile>(), py::arg("params"))
      .def_property_readonly("params", &Pipeline::params)
      .def_property_readonly("power", &Pipeline::power)
      .def("verify", &Pipeline::verify, py::arg("tau"))
      .def("evaluate", &Pipeline::evaluate, py::arg("tau"))
      .def("omega", &Pipeline::omega, py::arg("tol") = 1e-9, py::call_guard<py::gil_scoped_release>());

  m.def("level1_value", &level1_value, py::arg("component"), py::arg("q"), py::arg("tau"));
  m.def("merging_value", py::overload_cast<int, int, int, double, int>(&merging_value), py::arg("j"), py::arg("k"),
        py::arg("q"), py::arg("tau"), py::arg("level"));

  py::class_<Level1Opt>(m, "Level1Opt")
      .def_readonly("b", &Level1Opt::b)
      .def_readonly("log2_value", &Level1Opt::log2_value);
  m.def("optimize_level1", &optimize_level1, py::arg("q"), py::arg("tau"), py::arg("tol") = 1e-10);
  m.def("level1_param_file", &level1_param_file, py::arg("q"), py::arg("b"));

  m.def(
      "optimize_level2_omega",
      [](int q, int t_max, double tau0, int rounds) {
        const Level2Search s = optimize_level2_omega(q, t_max, tau0, rounds);
        return py::make_tuple(s.omega, level2_family_param_file(q, s.best.family), s.omegas);
      },
      py::arg("q"), py::arg("t_max"), py::arg("tau0"), py::arg("rounds") = 6,
      "Returns (OmegaResult, ParamFile of the best family, omega after each round).");

  m.def(
      "simulate_level2",
      [](const std::map<std::tuple<int, int, int>, long>& counts, std::uint64_t seed,
         const std::map<int, double>& a_split) {
        Level2SimParams p;
        p.q = 2;
        for (const auto& [c, n] : counts) p.counts[Component{std::get<0>(c), std::get<1>(c), std::get<2>(c), 2}] = n;
        if (!a_split.empty()) p.A = SplitDistribution{2, 2, a_split};
        const Level2SimResult r = level2_pipeline(p, seed);
        py::dict out;
        out["modulus"] = r.M;
        out["sizing_ok"] = r.sizing_ok;
        out["copies"] = r.copies.size();
        out["certified"] = r.cert.passed();
        out["failures"] = r.cert.failures;
        return out;
      },
      py::arg("counts"), py::arg("seed"), py::arg("a_split") = std::map<int, double>{},
      "Runs the q=2 level-2 simulator on level-2 component counts {(i, j, k): n}.");
}
