#pragma once

#include "wavefront_lab/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wfl {

inline constexpr int kConfigVersion = 1;

enum class SolverMethod { Exact, Mehler, SplitStep };

struct ScenarioConfig {
  std::string name;
  Json symbol_spec;
  std::string family;  // jump, gaussian, spike, hermite, box
  Json family_params;
  WavefrontSet initial_wf;
  std::vector<double> times;
  std::vector<std::string> time_labels;  // as written in the config
  SolverMethod method = SolverMethod::Exact;
  int n = 2048;
  double L = 12.0;
  double dt = 1e-3;
  std::vector<double> scales;
  double threshold = 1e-3;
  double base_tol_cells = 2.0;
  double angle_tol = 0.1;
  int cone_samples = 64;
  double cone_tol = 1e-9;
  std::uint64_t seed = 0;
  bool snapshots = true;
  Json raw;

  int d() const;
  ClassicalSymbol symbol() const;
  GridState initial_state() const;
};

// Throws Error(Config) with a message naming the offending field.
ScenarioConfig parse_scenario(const Json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// "pi", "pi/4", "3*pi/2", "2pi", or a plain number.
double parse_time(const Json& j);

struct TimeResult {
  double t = 0.0;
  std::string label;
  std::string verdict;  // PASS, PASS-empty, FAIL
  WavefrontSet predicted;
  RecurrenceCone cone;
  DetectionResult detected;
  ComparisonReport comparison;
  std::optional<ComparisonReport> comparison_support_filtered;
  double score_ratio = 0.0;  // peak score relative to t = 0
  double composition_residual = 0.0;
  double unitarity_drift = 0.0;
  double boundary_mass = 0.0;
  std::string snapshot_sha256;
};

struct RunReport {
  std::string name;
  bool pass = true;
  std::vector<TimeResult> times;
  Json json;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<std::filesystem::path> cache_dir;  // defaults to $WAVEFRONT_LAB_CACHE
};

// Error raised inside a pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner);
  const std::string& stage() const { return stage_; }
  Json record() const;

 private:
  std::string stage_;
};

RunReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});
// Scenarios run in a pool of opts.jobs workers; reports keep input order.
std::vector<RunReport> run_scenarios(const std::vector<ScenarioConfig>& cfgs, const RunOptions& opts = {});

// Largest base distance between two canonicalised prediction sets with the
// same ray count and matching directions; infinity otherwise.
double composition_residual(const WavefrontSet& a, const WavefrontSet& b);

// Exit codes: 0 all PASS, 1 some FAIL, 2 configuration error, 3 module error.
enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitModule = 3 };

// Environment fingerprint (kept out of the deterministic report).
Json environment_fingerprint();

}  // namespace wfl
