#include "wavefront_lab/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace wfl;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    out.push_back(parse_time(Json(part)));
  }
  return out;
}

std::vector<fs::path> expand_configs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

int report_error(const Error& e, const std::string& stage) {
  const Json rec = Json{{"stage", stage}, {"kind", to_string(e.kind())}, {"message", e.what()}};
  std::cerr << rec.dump() << "\n";
  return e.kind() == ErrorKind::Config ? kExitConfig : kExitModule;
}

ClassicalSymbol symbol_for_scan(const std::string& omega, const std::string& config) {
  if (!config.empty()) {
    const Json j = read_json_file(config);
    return symbol_from_json(j.contains("symbol") ? j["symbol"] : j);
  }
  const auto w = parse_list(omega.empty() ? "1" : omega);
  for (double v : w) {
    if (!(v > 0.0)) throw Error(ErrorKind::Config, "--omega values must be positive");
  }
  return oscillator_symbol(w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavefront-lab: wavefront propagation experiments for quantum oscillators"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run scenario configs (files or directories)");
  run->add_option("--config,-c", configs, "Scenario config file or directory")->required();
  run->add_option("--out-dir,-o", out_dir, "Output directory");
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--jobs,-j", jobs, "Scenario worker count");

  std::string omega, scan_config;
  double t_min = 0.0, t_max = 2.0 * kPi, resolution = 1e-2;
  int n_samples = 0;
  auto* scan = app.add_subcommand("scan", "Find recurrence times and cones");
  scan->alias("scan-recurrence");
  scan->add_option("--omega", omega, "Oscillator frequencies, comma separated");
  scan->add_option("--config,-c", scan_config, "Symbol spec or scenario config");
  scan->add_option("--t-min", t_min, "Start of the time window");
  scan->add_option("--t-max", t_max, "End of the time window");
  scan->add_option("--resolution", resolution, "Bracketing resolution");
  scan->add_option("--samples", n_samples, "Sphere samples per time (0: automatic)");
  scan->add_option("--out-dir,-o", out_dir, "Write recurrence.json here");
  auto* scan_seed = scan->add_option("--seed", seed, "Sampling seed");
  scan->add_option("--jobs,-j", jobs, "Worker count");

  std::string snapshot, scales_arg;
  double threshold = 1e-3;
  auto* detect = app.add_subcommand("detect", "Detect wavefront rays in a state snapshot");
  detect->add_option("--snapshot", snapshot, "Snapshot sidecar or data file")->required();
  detect->add_option("--scales", scales_arg, "Comma-separated Gabor scales h");
  detect->add_option("--threshold", threshold, "Relative magnitude threshold");
  detect->add_option("--out-dir,-o", out_dir, "Write detection.json here");

  std::string suite = "default", problem;
  int alpha_max = 2;
  auto* sp = app.add_subcommand("statphase", "Oscillatory-integral boundedness bench");
  sp->add_option("--suite", suite, "Problem suite (default)");
  sp->add_option("--problem", problem, "Single problem: gaussian, cubic, rotational");
  sp->add_option("--alpha-max", alpha_max, "Largest derivative order (capped at 2)");
  sp->add_option("--out-dir,-o", out_dir, "Write CSV and JSON reports here");
  sp->add_option("--jobs,-j", jobs, "Worker count");

  std::vector<std::string> validate_configs;
  auto* val = app.add_subcommand("validate", "Validate scenario configs and their symbols");
  val->add_option("--config,-c", validate_configs, "Scenario config file or directory")->required();
  auto* val_seed = val->add_option("--seed", seed, "Sampling seed");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0 || scan_seed->count() > 0 || val_seed->count() > 0;

  if (run->parsed()) {
    std::vector<ScenarioConfig> cfgs;
    for (const auto& path : expand_configs(configs)) {
      try {
        cfgs.push_back(load_scenario(path));
      } catch (const Error& e) {
        std::cerr << path.string() << ": ";
        return report_error(e, "config");
      }
    }
    RunOptions opts;
    opts.out_dir = out_dir;
    opts.jobs = std::max(1, jobs);
    if (seed_set) opts.seed = seed;
    const auto reports = run_scenarios(cfgs, opts);
    int code = kExitPass;
    for (const auto& r : reports) {
      if (r.json.contains("error")) {
        std::cerr << r.json["error"].dump() << "\n";
        std::cout << r.name << ": ERROR (" << r.json["error"]["stage"].get<std::string>() << ")\n";
        code = std::max<int>(code, r.json["error"]["kind"] == to_string(ErrorKind::Config) ? kExitConfig : kExitModule);
        continue;
      }
      for (const auto& t : r.times) {
        std::printf("%s t=%s: %s (predicted %zu, detected %zu, score ratio %.3g)\n", r.name.c_str(), t.label.c_str(),
                    t.verdict.c_str(), t.comparison.n_predicted, t.comparison.n_detected, t.score_ratio);
      }
      std::cout << r.name << ": " << (r.pass ? "PASS" : "FAIL") << "\n";
      if (!r.pass) code = std::max<int>(code, kExitFail);
    }
    return code;
  }

  if (scan->parsed()) {
    try {
      const ClassicalSymbol p = symbol_for_scan(omega, scan_config);
      ScanOptions so;
      if (seed_set) so.seed = seed;
      so.jobs = std::max(1, jobs);
      const auto times = recurrence_times(p, t_min, t_max, resolution, so, n_samples);
      Json out = Json::array();
      for (const auto& rt : times) {
        std::vector<int> es;
        for (const auto& d : rt.cone.directions) es.push_back(d.excess);
        const int e = es.empty() ? 0 : *std::max_element(es.begin(), es.end());
        std::printf("t=%.9f e=%d directions=%zu residual=%.2e\n", rt.t, e, rt.cone.directions.size(), rt.residual);
        Json j = to_json(rt.cone);
        j["residual"] = rt.residual;
        j["e"] = e;
        out.push_back(j);
      }
      if (!out_dir.empty()) write_text_file(fs::path(out_dir) / "recurrence.json", dump(out));
    } catch (const Error& e) {
      return report_error(e, "recurrence");
    }
    return kExitPass;
  }

  if (detect->parsed()) {
    try {
      const GridState s = read_snapshot(snapshot);
      const auto scales = scales_arg.empty() ? default_scales() : parse_list(scales_arg);
      const DetectionResult r = detect_wf(s, scales, threshold);
      const std::string text = dump(to_json(r));
      if (!out_dir.empty()) write_text_file(fs::path(out_dir) / "detection.json", text);
      std::cout << text;
    } catch (const Error& e) {
      return report_error(e, "detect");
    }
    return kExitPass;
  }

  if (sp->parsed()) {
    try {
      std::vector<StatPhaseProblem> probs;
      if (!problem.empty()) {
        probs.push_back(find_problem(problem));
      } else if (suite == "default") {
        probs = default_suite();
      } else {
        throw Error(ErrorKind::Config, "unknown suite " + suite);
      }
      BoundednessOptions bo;
      bo.alpha_max = alpha_max;
      bo.jobs = std::max(1, jobs);
      bool all = true;
      Json summary = Json::array();
      for (const auto& p : probs) {
        const auto rep = verify_boundedness(p, bo);
        std::printf("%s: m=%g max_slope=%.4f %s\n", p.name.c_str(), rep.m, rep.max_slope, rep.pass ? "PASS" : "FAIL");
        for (const auto& w : rep.warnings) std::printf("  warning: %s\n", w.c_str());
        all = all && rep.pass;
        if (!out_dir.empty()) {
          write_text_file(fs::path(out_dir) / (p.name + ".csv"), rep.to_csv());
          summary.push_back(to_json(rep));
        }
      }
      if (!out_dir.empty()) write_text_file(fs::path(out_dir) / "statphase.json", dump(summary));
      return all ? kExitPass : kExitFail;
    } catch (const Error& e) {
      return report_error(e, "statphase");
    }
  }

  if (val->parsed()) {
    int code = kExitPass;
    for (const auto& path : expand_configs(validate_configs)) {
      try {
        const auto cfg = load_scenario(path);
        const auto rep = validate(cfg.symbol(), seed_set ? seed : cfg.seed);
        std::cout << path.string() << ": " << (rep.ok() ? "valid" : "symbol check failed") << "\n";
        std::cout << dump(to_json(rep));
        if (!rep.ok()) code = kExitConfig;
      } catch (const Error& e) {
        std::cerr << path.string() << ": ";
        code = std::max(code, report_error(e, "config"));
      }
    }
    return code;
  }
  return kExitPass;
}
