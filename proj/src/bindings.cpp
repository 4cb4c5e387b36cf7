// Python bindings: commands take a plain dict mirroring the CLI flags and return the JSON report as a dict.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "govdamp/commands.hpp"
#include "govdamp/simulator.hpp"

namespace py = pybind11;
using namespace govdamp;

namespace {

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig to_config(const std::string& command, const py::dict& opts) {
  RunConfig cfg;
  cfg.command = command;
  for (const auto& [k, v] : opts) {
    const auto key = py::str(k).cast<std::string>();
    if (key == "case") cfg.case_path = py::str(v).cast<std::string>();
    else if (key == "controllers") cfg.controllers = ControllerChoice::parse(py::str(v).cast<std::string>());
    else if (key == "fractions") {
      if (py::isinstance<py::str>(v)) cfg.fractions = parse_fractions(v.cast<std::string>());
      else cfg.fractions = v.cast<std::vector<double>>();
    } else if (key == "scenario") cfg.scenario_path = py::str(v).cast<std::string>();
    else if (key == "band") {
      if (py::isinstance<py::str>(v)) std::tie(cfg.band_lo, cfg.band_hi) = parse_band(v.cast<std::string>());
      else std::tie(cfg.band_lo, cfg.band_hi) = v.cast<std::pair<double, double>>();
    } else if (key == "out") cfg.out_dir = py::str(v).cast<std::string>();
    else if (key == "workers") cfg.workers = v.cast<int>();
    else if (key == "seed") cfg.seed = v.cast<std::uint64_t>();
    else if (key == "kappa") {
      const auto s = v.cast<std::string>();
      if (s != "fixed" && s != "variable") throw py::value_error("kappa must be 'fixed' or 'variable'");
      cfg.kappa_mode = s == "variable" ? KappaMode::Variable : KappaMode::Fixed;
    } else if (key == "bound_samples") cfg.bound_samples = v.cast<int>();
    else throw py::value_error("unknown option '" + key + "'");
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Governor-based inter-area damping: power flow, modal analysis, LMI synthesis, simulation";

  m.def(
      "run",
      [](const std::string& command, const py::dict& opts) {
        Report r;
        {
          const RunConfig cfg = to_config(command, opts);
          py::gil_scoped_release nogil;
          r = run_command(cfg);
          if (!cfg.out_dir.empty() && r.exit_code == ExitCode::Ok) write_report(r, cfg.out_dir);
        }
        py::dict files;
        for (const auto& [name, body] : r.files) files[py::str(name)] = py::str(body);
        py::dict out;
        out["exit_code"] = static_cast<int>(r.exit_code);
        out["report"] = to_py(r.json);
        out["files"] = files;
        return out;
      },
      py::arg("command"), py::arg("options") = py::dict());

  m.def(
      "ringdown",
      [](const Eigen::VectorXd& series, double dt, double f_lo, double f_hi) {
        const Ringdown r = ringdown_damping(series, dt, f_lo, f_hi);
        return py::dict(py::arg("frequency_hz") = r.frequency_hz, py::arg("zeta") = r.zeta,
                        py::arg("peaks") = r.peaks);
      },
      py::arg("series"), py::arg("dt"), py::arg("f_lo"), py::arg("f_hi"));

  m.def("spearman", &spearman, py::arg("a"), py::arg("b"));
}
