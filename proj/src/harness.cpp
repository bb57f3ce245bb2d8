#include "wavefront_lab/harness.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <regex>
#include <sstream>

namespace wfl {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) config_error(where + " is missing \"" + key + "\"");
  return j[key];
}

double number(const Json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j[key].is_number()) config_error(std::string("\"") + key + "\" must be a number");
  return j[key].get<double>();
}

std::string join(const Vec& v) {
  std::ostringstream os;
  os << std::setprecision(12);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

bool half_period_time(double t) {
  const double s = t / kPi - 0.5;
  return std::abs(s - std::round(s)) < 1e-9;
}

}  // namespace

double parse_time(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) config_error("times must be numbers or strings such as \"pi/2\"");
  std::string s = j.get<std::string>();
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  static const std::regex pi_form(R"(^([+-]?[0-9]*\.?[0-9]*)\*?pi(/([0-9]*\.?[0-9]+))?$)");
  std::smatch m;
  if (std::regex_match(s, m, pi_form)) {
    const std::string coef = m[1].str();
    double k = 1.0;
    if (coef == "-") {
      k = -1.0;
    } else if (!coef.empty() && coef != "+") {
      k = std::stod(coef);
    }
    const double div = m[3].matched ? std::stod(m[3].str()) : 1.0;
    if (div == 0.0) config_error("division by zero in time " + s);
    return k * kPi / div;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  config_error("cannot parse time \"" + s + "\"");
}

int ScenarioConfig::d() const { return symbol_spec.at("d").get<int>(); }

ClassicalSymbol ScenarioConfig::symbol() const { return symbol_from_json(symbol_spec); }

GridState ScenarioConfig::initial_state() const {
  const int dim = d();
  const Json& p = family_params;
  if (family == "jump") {
    JumpParams jp;
    jp.x0 = number(p, "x0", jp.x0);
    jp.envelope_center = number(p, "envelope_center", jp.x0);
    jp.envelope_width = number(p, "envelope_width", jp.envelope_width);
    jp.cutoff_inner = number(p, "cutoff_inner", jp.cutoff_inner);
    jp.cutoff_outer = number(p, "cutoff_outer", jp.cutoff_outer);
    return jump_state(dim, n, L, jp);
  }
  if (family == "gaussian" || family == "spike") {
    const Vec center = p.contains("center") ? vec_from_json(p["center"]) : Vec::Zero(dim);
    const Vec momentum = p.contains("momentum") ? vec_from_json(p["momentum"]) : Vec::Zero(dim);
    const double width = family == "spike" ? 4.0 / n : number(p, "width", 1.0);
    if (center.size() != dim || momentum.size() != dim) config_error("center and momentum need d entries");
    return gaussian_state(dim, n, L, center, width, momentum);
  }
  if (family == "hermite") {
    std::vector<int> orders = p.value("orders", std::vector<int>(static_cast<std::size_t>(dim), 0));
    if (static_cast<int>(orders.size()) != dim) config_error("hermite orders need d entries");
    return hermite_state(dim, n, L, orders);
  }
  if (family == "box") {
    if (dim != 1) config_error("box family is one-dimensional");
    return box_state(n, L, number(p, "half_width", 0.4));
  }
  config_error("unknown initial-data family \"" + family + "\"");
}

namespace {

ScenarioConfig parse_scenario_impl(const Json& j) {
  if (!j.is_object()) config_error("scenario config must be a JSON object");
  ScenarioConfig c;
  c.raw = j;
  const int version = j.value("version", kConfigVersion);
  if (version != kConfigVersion) config_error("unsupported config version " + std::to_string(version));
  c.name = j.value("name", std::string("scenario"));
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) config_error("invalid scenario name");

  c.symbol_spec = require(j, "symbol", "config");
  require(c.symbol_spec, "p2", "symbol");
  const ClassicalSymbol sym = symbol_from_json(c.symbol_spec);
  const int d = sym.dimension();

  const Json& init = require(j, "initial_data", "config");
  c.family = require(init, "family", "initial_data").get<std::string>();
  c.family_params = init.value("params", Json::object());
  if (init.contains("wavefront")) {
    c.initial_wf = wavefront_from_json(init["wavefront"]);
  } else if (c.family == "jump" && d == 1) {
    const double x0 = number(c.family_params, "x0", 1.0);
    c.initial_wf.rays = {make_ray(Vec::Constant(1, x0), Vec::Constant(1, 1.0)),
                         make_ray(Vec::Constant(1, x0), Vec::Constant(1, -1.0))};
  } else if (c.family == "box") {
    const double a = number(c.family_params, "half_width", 0.4);
    for (double b : {-a, a}) {
      for (double s : {1.0, -1.0}) c.initial_wf.rays.push_back(make_ray(Vec::Constant(1, b), Vec::Constant(1, s)));
    }
  } else if (c.family == "gaussian" || c.family == "hermite") {
    c.initial_wf.compact_support = false;
  } else {
    config_error("initial_data needs a declared \"wavefront\" for family " + c.family);
  }
  if (init.contains("compact_support")) c.initial_wf.compact_support = init["compact_support"].get<bool>();
  for (const auto& r : c.initial_wf.rays) {
    if (r.base.size() != d) config_error("declared wavefront rays must live in dimension d");
  }

  const Json& times = require(j, "times", "config");
  if (!times.is_array() || times.empty()) config_error("times must be a non-empty list");
  for (const auto& t : times) {
    c.times.push_back(parse_time(t));
    c.time_labels.push_back(t.is_string() ? t.get<std::string>() : fmt(t.get<double>()));
  }
  if (!std::is_sorted(c.times.begin(), c.times.end())) config_error("times must be sorted");
  if (c.times.front() < 0.0) config_error("times must be non-negative");

  const Json solver = j.value("solver", Json::object());
  c.n = solver.value("n", c.n);
  c.L = number(solver, "L", c.L);
  c.dt = number(solver, "dt", c.dt);
  if (c.n < 16 || (c.n & (c.n - 1)) != 0) config_error("solver.n must be a power of two >= 16");
  if (!(c.L > 0.0) || !(c.dt > 0.0)) config_error("solver.L and solver.dt must be positive");
  const std::string method = solver.value("method", std::string("exact"));
  if (method == "exact") {
    c.method = SolverMethod::Exact;
  } else if (method == "mehler") {
    c.method = SolverMethod::Mehler;
  } else if (method == "splitstep") {
    c.method = SolverMethod::SplitStep;
  } else {
    config_error("solver.method must be exact, mehler or splitstep");
  }

  const Json det = j.value("detector", Json::object());
  c.scales = det.value("scales", default_scales());
  c.threshold = number(det, "threshold", c.threshold);
  const Json cmp = j.value("comparison", Json::object());
  c.base_tol_cells = number(cmp, "base_tol_cells", c.base_tol_cells);
  c.angle_tol = number(cmp, "angle_tol", c.angle_tol);
  const Json rec = j.value("recurrence", Json::object());
  c.cone_samples = rec.value("n_samples", 64 * d * d);
  c.cone_tol = number(rec, "tol", c.cone_tol);
  c.seed = j.value("seed", std::uint64_t{0});
  c.snapshots = j.value("snapshots", true);

  // Hamiltonian must be solvable by the quantum module.
  hamiltonian_from_symbol(sym);
  if (c.method == SolverMethod::Mehler && sym.has_p1()) config_error("solver.method mehler needs p1 = 0");
  return c;
}

}  // namespace

ScenarioConfig parse_scenario(const Json& j) {
  try {
    return parse_scenario_impl(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed config: ") + e.what());
  }
}

ScenarioConfig load_scenario(const fs::path& path) { return parse_scenario(read_json_file(path)); }

StageError::StageError(std::string stage, const Error& inner)
    : Error(inner.kind(), stage + ": " + inner.what()), stage_(std::move(stage)) {}

Json StageError::record() const {
  return Json{{"stage", stage_}, {"kind", to_string(kind())}, {"message", what()}};
}

double composition_residual(const WavefrontSet& a, const WavefrontSet& b) {
  if (a.rays.size() != b.rays.size() || a.families.size() != b.families.size()) {
    return std::numeric_limits<double>::infinity();
  }
  WavefrontSet x = a, y = b;
  x.canonicalize();
  y.canonicalize();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rays.size(); ++i) {
    if ((x.rays[i].dir - y.rays[i].dir).norm() > 1e-6) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, (x.rays[i].base - y.rays[i].base).norm());
  }
  for (std::size_t i = 0; i < x.families.size(); ++i) {
    worst = std::max(worst, y.families[i].distance(x.families[i].anchor));
  }
  return worst;
}

Json environment_fingerprint() {
  Json j;
  j["library"] = "wavefront-lab 0.1.0";
#ifdef __VERSION__
  j["compiler"] = __VERSION__;
#endif
  j["cxx_standard"] = static_cast<long>(__cplusplus);
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["fftw"] = std::string(fftw_version);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  j["timestamp_utc"] = os.str();
  return j;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

std::optional<fs::path> cache_root(const RunOptions& opts) {
  if (opts.cache_dir) return opts.cache_dir;
  if (const char* env = std::getenv("WAVEFRONT_LAB_CACHE"); env && *env) return fs::path(env);
  return std::nullopt;
}

GridState solve(const ScenarioConfig& cfg, const GridState& u0, const QuadraticHamiltonianSpec& spec, double t,
                const RunOptions& opts) {
  if (t == 0.0) return u0;
  const auto root = cache_root(opts);
  std::string key;
  if (root) {
    Json k;
    k["symbol"] = cfg.symbol_spec;
    k["family"] = cfg.family;
    k["params"] = cfg.family_params;
    k["n"] = cfg.n;
    k["L"] = cfg.L;
    k["dt"] = cfg.dt;
    k["method"] = static_cast<int>(cfg.method);
    k["t"] = t;
    key = sha256_hex(k.dump());
    const fs::path side = *root / (key + ".json");
    if (fs::exists(side)) {
      try {
        return read_snapshot(side);
      } catch (const Error&) {
        // Corrupt cache entries are recomputed.
      }
    }
  }
  GridState out;
  switch (cfg.method) {
    case SolverMethod::Exact:
      out = exact_propagate(u0, t, spec);
      break;
    case SolverMethod::Mehler:
      out = mehler_propagate(u0, t, spec);
      break;
    case SolverMethod::SplitStep:
      out = splitstep_propagate(u0, t, spec, cfg.dt);
      break;
  }
  if (root) {
    try {
      write_snapshot(out, *root, key);
    } catch (const Error&) {
    }
  }
  return out;
}

// Predicted rays whose reflected base -b lies outside the numerical support of u(t) are dropped.
WavefrontSet support_filtered(const WavefrontSet& wf, const GridState& u) {
  double peak = 0.0;
  for (const auto& v : u.values) peak = std::max(peak, std::norm(v));
  WavefrontSet out = wf;
  out.rays.clear();
  for (const auto& r : wf.rays) {
    std::size_t flat = 0;
    bool inside = true;
    for (int a = 0; a < u.d; ++a) {
      const long j = std::lround((-r.base[a] + u.L) / u.dx());
      if (j < 0 || j >= u.n) inside = false;
      flat = flat * static_cast<std::size_t>(u.n) + static_cast<std::size_t>(std::clamp<long>(j, 0, u.n - 1));
    }
    if (inside && std::norm(u.values[flat]) >= 1e-6 * peak) out.rays.push_back(r);
  }
  return out;
}

std::string verdict_for(const WavefrontSet& predicted, const DetectionResult& detected, const ComparisonReport& cmp) {
  const bool pred_empty = predicted.rays.empty() && predicted.families.empty();
  const bool det_empty = detected.rays.rays.empty();
  if (pred_empty && det_empty) return "PASS-empty";
  if (predicted.bound == BoundKind::InnerBoundOnly) return cmp.coverage >= 1.0 ? "PASS" : "FAIL";
  if (!cmp.pass) return "FAIL";
  if (!pred_empty && det_empty) return "FAIL";
  if (predicted.bound == BoundKind::Exact && cmp.coverage < 1.0) return "FAIL";
  return "PASS";
}

Json labels(const WavefrontSet& wf) {
  return Json{{"bound", to_string(wf.bound)},
              {"upper_bound", wf.compact_support},
              {"inner_bound", true}};
}

void write_outputs(const ScenarioConfig& cfg, const RunReport& rep, const std::vector<GridState>& states,
                   const fs::path& dir) {
  write_text_file(dir / "report.json", dump(rep.json));
  std::ostringstream cmp;
  cmp << "t,label,verdict,n_predicted,n_detected,coverage,detected_to_predicted,predicted_to_detected,score_ratio,"
         "composition_residual,filtered_verdict\n";
  std::ostringstream rays;
  rays << "t,source,base,dir,weight\n";
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const auto& tr = rep.times[k];
    std::string filtered = "";
    if (tr.comparison_support_filtered) filtered = tr.comparison_support_filtered->pass ? "PASS" : "FAIL";
    cmp << fmt(tr.t) << ',' << tr.label << ',' << tr.verdict << ',' << tr.comparison.n_predicted << ','
        << tr.comparison.n_detected << ',' << fmt(tr.comparison.coverage) << ','
        << fmt(tr.comparison.detected_to_predicted) << ',' << fmt(tr.comparison.predicted_to_detected) << ','
        << fmt(tr.score_ratio) << ',' << fmt(tr.composition_residual) << ',' << filtered << '\n';
    for (const auto& r : tr.predicted.rays) {
      rays << fmt(tr.t) << ",predicted," << join(r.base) << ',' << join(r.dir) << ',' << fmt(r.weight) << '\n';
    }
    for (const auto& r : tr.detected.rays.rays) {
      rays << fmt(tr.t) << ",detected," << join(r.base) << ',' << join(r.dir) << ',' << fmt(r.weight) << '\n';
    }
    if (cfg.d() == 1 && !cfg.scales.empty()) {
      const double h = *std::min_element(cfg.scales.begin(), cfg.scales.end());
      const GaborField g = gabor_transform(states[k], h);
      std::ostringstream gs;
      gs << "x,xi,magnitude\n";
      // Thinned to at most ~128 samples per axis for plotting.
      const std::size_t sx = std::max<std::size_t>(1, g.xs.size() / 128);
      const std::size_t sxi = std::max<std::size_t>(1, g.xis.size() / 128);
      for (std::size_t ix = 0; ix < g.xs.size(); ix += sx) {
        for (std::size_t ixi = 0; ixi < g.xis.size(); ixi += sxi) {
          gs << fmt(g.xs[ix]) << ',' << fmt(g.xis[ixi]) << ',' << fmt(g.at(ix, ixi)) << '\n';
        }
      }
      write_text_file(dir / ("gabor_t" + std::to_string(k) + ".csv"), gs.str());
    }
    if (cfg.snapshots) write_snapshot(states[k], dir / "snapshots", "t" + std::to_string(k));
  }
  write_text_file(dir / "comparison.csv", cmp.str());
  write_text_file(dir / "rays.csv", rays.str());
  write_text_file(dir / "environment.json", dump(environment_fingerprint()));
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const ClassicalSymbol sym = stage("symbol", [&] { return cfg.symbol(); });
  const ValidationReport validation = stage("symbol", [&] { return validate(sym, seed); });
  const QuadraticHamiltonianSpec spec = stage("symbol", [&] { return hamiltonian_from_symbol(sym); });
  const GridState u0 = stage("initial_data", [&] { return cfg.initial_state(); });
  const DetectionResult reference =
      stage("detect", [&] { return detect_wf(u0, cfg.scales, cfg.threshold); });
  const double base_tol = cfg.base_tol_cells * u0.dx();

  ScanOptions scan;
  scan.seed = seed;
  PredictOptions popts;
  popts.scan = scan;

  RunReport rep;
  rep.name = cfg.name;
  std::vector<GridState> states;
  Json times = Json::array();
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    TimeResult tr;
    tr.t = cfg.times[k];
    tr.label = cfg.time_labels[k];
    tr.cone = stage("recurrence", [&] { return gamma_scan(sym, tr.t, cfg.cone_samples, cfg.cone_tol, scan); });
    WavefrontSet composed;
    stage("predict", [&] {
      composed = propagate_free(propagate_reduced(cfg.initial_wf, tr.t, sym), tr.t, sym, tr.cone, popts);
      if (cfg.initial_wf.compact_support) {
        tr.predicted = propagate_full(cfg.initial_wf, tr.t, sym, tr.cone, popts);
        tr.composition_residual = composition_residual(tr.predicted, composed);
      } else {
        tr.predicted = composed;
      }
      return 0;
    });
    const GridState u = stage("solve", [&] { return solve(cfg, u0, spec, tr.t, opts); });
    tr.unitarity_drift = std::abs(u.norm() / u0.norm() - 1.0);
    tr.boundary_mass = u.boundary_mass();
    tr.snapshot_sha256 = state_hash(u);
    tr.detected = stage("detect", [&] { return detect_wf(u, cfg.scales, cfg.threshold); });
    tr.score_ratio = reference.peak_score > 0.0 ? tr.detected.peak_score / reference.peak_score : 0.0;
    tr.comparison = stage("compare", [&] { return compare_wf(tr.predicted, tr.detected, base_tol, cfg.angle_tol, u.L); });
    if (half_period_time(tr.t)) {
      tr.comparison_support_filtered = compare_wf(support_filtered(tr.predicted, u), tr.detected, base_tol,
                                                  cfg.angle_tol, u.L);
    }
    tr.verdict = verdict_for(tr.predicted, tr.detected, tr.comparison);
    rep.pass = rep.pass && tr.verdict != "FAIL";

    Json e;
    e["t"] = tr.t;
    e["label"] = tr.label;
    e["verdict"] = tr.verdict;
    e["predicted"] = to_json(tr.predicted);
    e["prediction_labels"] = labels(tr.predicted);
    e["composition_residual"] = std::isfinite(tr.composition_residual) ? Json(tr.composition_residual) : Json("inf");
    e["cone"] = to_json(tr.cone);
    std::vector<int> es;
    for (const auto& dir : tr.cone.directions) es.push_back(dir.excess);
    e["cone_summary"] = Json{{"n_directions", tr.cone.directions.size()}, {"excess", es}};
    e["detected"] = to_json(tr.detected);
    e["comparison"] = to_json(tr.comparison);
    if (tr.comparison_support_filtered) {
      e["comparison_support_filtered"] = to_json(*tr.comparison_support_filtered);
      e["comparison_support_filtered"]["verdict"] =
          verdict_for(support_filtered(tr.predicted, u), tr.detected, *tr.comparison_support_filtered);
    }
    e["score_ratio"] = tr.score_ratio;
    Json solver;
    solver["unitarity_drift"] = tr.unitarity_drift;
    solver["boundary_mass"] = tr.boundary_mass;
    solver["snapshot_sha256"] = tr.snapshot_sha256;
    if (!u.warnings.empty()) solver["warnings"] = u.warnings;
    e["solver"] = solver;
    times.push_back(e);
    rep.times.push_back(std::move(tr));
    if (!opts.out_dir.empty()) states.push_back(u);
  }

  Json j;
  j["version"] = kConfigVersion;
  j["name"] = cfg.name;
  j["config_sha256"] = sha256_hex(cfg.raw.dump());
  j["seed"] = seed;
  j["config"] = cfg.raw;
  j["symbol_validation"] = to_json(validation);
  j["initial_wavefront"] = to_json(cfg.initial_wf);
  j["initial_state_sha256"] = state_hash(u0);
  j["reference_peak_score"] = reference.peak_score;
  j["base_tol"] = base_tol;
  j["angle_tol"] = cfg.angle_tol;
  j["times"] = times;
  j["pass"] = rep.pass;
  rep.json = j;

  if (!opts.out_dir.empty()) {
    stage("report", [&] {
      write_outputs(cfg, rep, states, opts.out_dir / cfg.name);
      return 0;
    });
  }
  return rep;
}

std::vector<RunReport> run_scenarios(const std::vector<ScenarioConfig>& cfgs, const RunOptions& opts) {
  std::vector<RunReport> out(cfgs.size());
  RunOptions inner = opts;
  inner.jobs = 1;
  parallel_for(cfgs.size(), opts.jobs, [&](std::size_t i) {
    try {
      out[i] = run_scenario(cfgs[i], inner);
    } catch (const StageError& e) {
      out[i].name = cfgs[i].name;
      out[i].pass = false;
      out[i].json = Json{{"name", cfgs[i].name}, {"error", e.record()}};
    } catch (const Error& e) {
      out[i].name = cfgs[i].name;
      out[i].pass = false;
      out[i].json = Json{{"name", cfgs[i].name}, {"error", StageError("run", e).record()}};
    }
  });
  return out;
}

}  // namespace wfl
