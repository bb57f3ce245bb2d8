#include "wavefront_lab/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace wfl;

// JSON crosses the boundary as text; the Python package decodes it.
namespace {

ClassicalSymbol parse_symbol(const std::string& spec) { return symbol_from_json(Json::parse(spec)); }

std::string text(const Json& j) { return j.dump(); }

py::array_t<cplx> values_of(const GridState& s) {
  std::vector<py::ssize_t> shape(static_cast<std::size_t>(s.d), s.n);
  py::array_t<cplx> out(shape);
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

GridState state_from(py::array_t<cplx, py::array::c_style | py::array::forcecast> values, double L, double t) {
  const int d = static_cast<int>(values.ndim());
  if (d < 1 || d > 2) throw Error(ErrorKind::Config, "state values must be 1- or 2-dimensional");
  const int n = static_cast<int>(values.shape(0));
  if (d == 2 && values.shape(1) != n) throw Error(ErrorKind::Config, "2-D states must be square");
  GridState s(d, n, L);
  std::copy(values.data(), values.data() + values.size(), s.values.begin());
  s.t = t;
  return s;
}

QuadraticHamiltonianSpec spec_from(const std::string& symbol) {
  return hamiltonian_from_symbol(parse_symbol(symbol));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of wavefront_lab";

  static py::exception<Error> error(m, "WavefrontLabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<GridState>(m, "GridState")
      .def(py::init(&state_from), py::arg("values"), py::arg("L"), py::arg("t") = 0.0)
      .def_readonly("d", &GridState::d)
      .def_readonly("n", &GridState::n)
      .def_readonly("L", &GridState::L)
      .def_readwrite("t", &GridState::t)
      .def_readonly("warnings", &GridState::warnings)
      .def_property_readonly("values", &values_of)
      .def_property_readonly("dx", &GridState::dx)
      .def_property_readonly("x", [](const GridState& s) {
        std::vector<double> xs(static_cast<std::size_t>(s.n));
        for (int j = 0; j < s.n; ++j) xs[static_cast<std::size_t>(j)] = s.x(j);
        return xs;
      })
      .def("norm", &GridState::norm)
      .def("boundary_mass", &GridState::boundary_mass)
      .def("sha256", [](const GridState& s) { return state_hash(s); })
      .def("__repr__", [](const GridState& s) {
        return "GridState(d=" + std::to_string(s.d) + ", n=" + std::to_string(s.n) + ", L=" + std::to_string(s.L) +
               ", t=" + std::to_string(s.t) + ")";
      });

  m.def("l2_distance", &l2_distance);

  // Symbols and flows.
  m.def("validate_symbol", [](const std::string& symbol, std::uint64_t seed) {
    return text(to_json(validate(parse_symbol(symbol), seed)));
  }, py::arg("symbol"), py::arg("seed") = 0);
  m.def("flow", [](const std::string& symbol, double t, const Vec& z0, double step) {
    FlowOptions o;
    o.step = step;
    return text(to_json(flow(parse_symbol(symbol), t, PhasePoint::from_stacked(z0), o)));
  }, py::arg("symbol"), py::arg("t"), py::arg("z0"), py::arg("step") = 1e-3);
  m.def("flow_numeric", [](const std::string& symbol, double t, const Vec& z0, double step) {
    return text(to_json(flow_numeric(parse_symbol(symbol), t, PhasePoint::from_stacked(z0), step)));
  }, py::arg("symbol"), py::arg("t"), py::arg("z0"), py::arg("step") = 1e-3);

  // Recurrence and prediction.
  m.def("gamma_scan", [](const std::string& symbol, double t, int samples, double tol, std::uint64_t seed) {
    ScanOptions so;
    so.seed = seed;
    return text(to_json(gamma_scan(parse_symbol(symbol), t, samples, tol, so)));
  }, py::arg("symbol"), py::arg("t"), py::arg("samples") = 64, py::arg("tol") = 1e-9, py::arg("seed") = 0);
  m.def("recurrence_times", [](const std::string& symbol, double t_min, double t_max, double resolution,
                               std::uint64_t seed) {
    ScanOptions so;
    so.seed = seed;
    Json out = Json::array();
    for (const auto& rt : recurrence_times(parse_symbol(symbol), t_min, t_max, resolution, so)) {
      Json j = to_json(rt.cone);
      j["residual"] = rt.residual;
      out.push_back(j);
    }
    return text(out);
  }, py::arg("symbol"), py::arg("t_min"), py::arg("t_max"), py::arg("resolution") = 1e-2, py::arg("seed") = 0);

  auto predict = [](bool full) {
    return [full](const std::string& wf, double t, const std::string& symbol, int samples, std::uint64_t seed) {
      const ClassicalSymbol p = parse_symbol(symbol);
      PredictOptions po;
      po.scan.seed = seed;
      const auto cone = gamma_scan(p, t, samples, 1e-9, po.scan);
      const WavefrontSet in = wavefront_from_json(Json::parse(wf));
      return text(to_json(full ? propagate_full(in, t, p, cone, po) : propagate_free(in, t, p, cone, po)));
    };
  };
  m.def("propagate_free", predict(false), py::arg("wavefront"), py::arg("t"), py::arg("symbol"),
        py::arg("samples") = 64, py::arg("seed") = 0);
  m.def("propagate_full", predict(true), py::arg("wavefront"), py::arg("t"), py::arg("symbol"),
        py::arg("samples") = 64, py::arg("seed") = 0);

  // Quantum propagation.
  m.def("mehler_propagate", [](const GridState& s, double t, const std::string& symbol) {
    return mehler_propagate(s, t, spec_from(symbol));
  }, py::arg("state"), py::arg("t"), py::arg("symbol"));
  m.def("exact_propagate", [](const GridState& s, double t, const std::string& symbol) {
    return exact_propagate(s, t, spec_from(symbol));
  }, py::arg("state"), py::arg("t"), py::arg("symbol"));
  m.def("splitstep_propagate", [](const GridState& s, double t, const std::string& symbol, double dt) {
    return splitstep_propagate(s, t, spec_from(symbol), dt);
  }, py::arg("state"), py::arg("t"), py::arg("symbol"), py::arg("dt") = 1e-3);

  m.def("jump_state", [](int d, int n, double L, double x0) {
    JumpParams p;
    p.x0 = x0;
    p.envelope_center = x0;
    return jump_state(d, n, L, p);
  }, py::arg("d") = 1, py::arg("n") = 2048, py::arg("L") = 12.0, py::arg("x0") = 1.0);
  m.def("gaussian_state", &gaussian_state, py::arg("d"), py::arg("n"), py::arg("L"), py::arg("center"),
        py::arg("width"), py::arg("momentum"));
  m.def("hermite_state", &hermite_state, py::arg("d"), py::arg("n"), py::arg("L"), py::arg("orders"),
        py::arg("omegas") = std::vector<double>{});
  m.def("box_state", &box_state, py::arg("n"), py::arg("L"), py::arg("half_width"));

  // Detection.
  m.def("default_scales", &default_scales);
  m.def("detect_wf", [](const GridState& s, std::vector<double> scales, double threshold) {
    if (scales.empty()) scales = default_scales();
    return text(to_json(detect_wf(s, scales, threshold)));
  }, py::arg("state"), py::arg("scales") = std::vector<double>{}, py::arg("threshold") = 1e-3);
  m.def("detect_wf_iso", [](const GridState& s) { return text(to_json(detect_wf_iso(s))); }, py::arg("state"));
  m.def("gabor_transform", [](const GridState& s, double h) {
    const GaborField g = gabor_transform(s, h);
    py::array_t<double> mags({static_cast<py::ssize_t>(g.xs.size()), static_cast<py::ssize_t>(g.xis.size())});
    std::copy(g.magnitudes.begin(), g.magnitudes.end(), mags.mutable_data());
    return py::make_tuple(g.xs, g.xis, mags);
  }, py::arg("state"), py::arg("h"));

  // Stationary phase.
  m.def("statphase_problems", [] {
    std::vector<std::string> names;
    for (const auto& p : default_suite()) names.push_back(p.name);
    return names;
  });
  m.def("verify_boundedness", [](const std::string& name, int alpha_max, int jobs) {
    BoundednessOptions o;
    o.alpha_max = alpha_max;
    o.jobs = jobs;
    py::gil_scoped_release release;
    return text(to_json(verify_boundedness(find_problem(name), o)));
  }, py::arg("problem"), py::arg("alpha_max") = 2, py::arg("jobs") = 1);
  m.def("eval_I", [](const std::string& name, double lambda, const Vec& y) {
    return eval_I(find_problem(name), lambda, y);
  }, py::arg("problem"), py::arg("lambda_"), py::arg("y"));

  // Harness.
  m.def("run_scenario", [](const std::string& config, const std::string& out_dir, int jobs) {
    const ScenarioConfig cfg = parse_scenario(Json::parse(config));
    RunOptions o;
    o.out_dir = out_dir;
    o.jobs = jobs;
    py::gil_scoped_release release;
    return text(run_scenario(cfg, o).json);
  }, py::arg("config"), py::arg("out_dir") = "", py::arg("jobs") = 1);
  m.def("sha256_hex", [](const std::string& s) { return sha256_hex(s); });
}
