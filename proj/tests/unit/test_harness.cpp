#include <doctest.h>

#include "wavefront_lab/harness.hpp"

#include <cstdlib>
#include <fstream>

using namespace wfl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wfl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Json stark_config(double c) {
  Json j = Json::parse(R"({
    "version": 1,
    "name": "stark",
    "symbol": {"d": 1, "p2": {"form": "poly", "monomials": {"2,0": 0.5, "0,2": 0.5}},
               "p1": {"form": "poly", "monomials": {"1,0": 0.5}}},
    "initial_data": {"family": "jump", "params": {"x0": 1.0}},
    "times": ["pi/2", "pi"],
    "solver": {"n": 2048, "L": 12.0},
    "seed": 3
  })");
  j["symbol"]["p1"]["monomials"]["1,0"] = c;
  return j;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Unsupported;
}

}  // namespace

TEST_CASE("time expressions") {
  CHECK(parse_time(Json("pi")) == doctest::Approx(kPi));
  CHECK(parse_time(Json("pi/4")) == doctest::Approx(kPi / 4));
  CHECK(parse_time(Json("3*pi/2")) == doctest::Approx(1.5 * kPi));
  CHECK(parse_time(Json("2pi")) == doctest::Approx(2 * kPi));
  CHECK(parse_time(Json("1.25")) == 1.25);
  CHECK(parse_time(Json(0.5)) == 0.5);
  CHECK(kind_of([] { parse_time(Json("tau")); }) == ErrorKind::Config);
}

TEST_CASE("symbol specs from JSON") {
  const auto p = symbol_from_json(Json::parse(R"({"d": 2, "p2": {"form": "oscillator", "omegas": [1, 2]}})"));
  const auto A = *p.quadratic_matrix();
  CHECK(A(0, 0) == doctest::Approx(1.0));
  CHECK(A(1, 1) == doctest::Approx(4.0));
  CHECK(A(2, 2) == doctest::Approx(1.0));

  const auto q = symbol_from_json(Json::parse(
      R"({"d": 1, "p2": {"monomials": [{"exponents": [2, 0], "coef": 2.0}, {"exponents": [0, 2], "coef": 0.5}]},
          "p1": {"form": "linear", "c": [0.25], "b": [0.0]}})"));
  const auto spec = hamiltonian_from_symbol(q);
  CHECK(spec.omegas[0] == doctest::Approx(2.0));
  CHECK(spec.c[0] == doctest::Approx(0.25));

  // Round trip through the canonical monomial object.
  const auto back = symbol_from_json(Json{{"d", 1}, {"p2", to_json(q.p2())}});
  const Vec z = (Vec(2) << 0.3, -1.1).finished();
  CHECK(back.p2().eval(z) == doctest::Approx(q.p2().eval(z)));

  CHECK(kind_of([] { symbol_from_json(Json::parse(R"({"d": 1})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { symbol_from_json(Json::parse(R"({"d": 1, "p2": {"monomials": {"2": 1}}})")); }) ==
        ErrorKind::Config);
  CHECK(kind_of([] {
          hamiltonian_from_symbol(symbol_from_json(Json::parse(R"({"d": 1, "p2": {"monomials": {"1,1": 1}}})")));
        }) == ErrorKind::Unsupported);
}

TEST_CASE("wavefront set JSON round trip") {
  WavefrontSet wf;
  wf.compact_support = false;
  wf.bound = BoundKind::InnerBoundOnly;
  wf.rays = {make_ray(Vec::Constant(1, -1.0), Vec::Constant(1, 2.0), 0.5)};
  const Json j = to_json(wf);
  CHECK(j["compact_support"] == false);
  CHECK(j["rays"][0]["dir"][0] == 1.0);
  const auto back = wavefront_from_json(j);
  CHECK_FALSE(back.compact_support);
  CHECK(back.bound == BoundKind::InnerBoundOnly);
  REQUIRE(back.rays.size() == 1);
  CHECK(back.rays[0].base[0] == -1.0);
  CHECK(back.rays[0].weight == 0.5);
}

TEST_CASE("recurrence cone and flow map JSON layout") {
  const auto p = oscillator_symbol({1.0});
  const auto cone = gamma_scan(p, kPi, 8, 1e-9);
  const Json j = to_json(cone);
  CHECK(j["t"] == doctest::Approx(kPi));
  REQUIRE(j["directions"].size() == 2);
  for (const char* key : {"eta", "xi", "e", "tangent_basis"}) CHECK(j["directions"][0].contains(key));

  const auto f = flow_exact(QuadraticForm::oscillator({1.0}), 0.5, PhasePoint(Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)));
  const Json fj = to_json(f);
  REQUIRE(fj["jacobian"].size() == 4);
  CHECK(fj["jacobian"][1] == doctest::Approx(f.jacobian(0, 1)));
  CHECK(fj["value"][0] == doctest::Approx(std::cos(0.5)));
}

TEST_CASE("snapshots round trip and detect corruption") {
  const fs::path dir = scratch("snap");
  GridState s = gaussian_state(1, 64, 5.0, Vec::Constant(1, 0.3), 1.0, Vec::Constant(1, 2.0));
  s.t = 1.5;
  const auto files = write_snapshot(s, dir, "u");
  CHECK(files.sha256 == state_hash(s));
  CHECK(files.sha256.size() == 64);
  const GridState back = read_snapshot(files.data);
  CHECK(back.t == 1.5);
  CHECK(back.L == 5.0);
  CHECK(l2_distance(back, s) == 0.0);

  // Known digest of the empty string.
  CHECK(sha256_hex(std::string()) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

  {
    std::fstream f(files.data, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put('\x7f');
  }
  CHECK(kind_of([&] { read_snapshot(files.sidecar); }) == ErrorKind::Io);
}

TEST_CASE("scenario validation errors") {
  Json j = stark_config(0.5);
  j["symbol"].erase("p2");
  CHECK(kind_of([&] { parse_scenario(j); }) == ErrorKind::Config);

  Json unsorted = stark_config(0.5);
  unsorted["times"] = Json::array({"pi", "pi/2"});
  CHECK(kind_of([&] { parse_scenario(unsorted); }) == ErrorKind::Config);

  Json badn = stark_config(0.5);
  badn["solver"]["n"] = 1000;
  CHECK(kind_of([&] { parse_scenario(badn); }) == ErrorKind::Config);

  Json badtype = stark_config(0.5);
  badtype["initial_data"]["family"] = 7;
  CHECK(kind_of([&] { parse_scenario(badtype); }) == ErrorKind::Config);

  Json mehler = stark_config(0.5);
  mehler["solver"]["method"] = "mehler";
  CHECK(kind_of([&] { parse_scenario(mehler); }) == ErrorKind::Config);
}

TEST_CASE("shifted scenario end to end") {
  const auto cfg = parse_scenario(stark_config(0.5));
  const fs::path out = scratch("run");
  RunOptions opts;
  opts.out_dir = out;
  opts.cache_dir = out / "cache";
  const auto rep = run_scenario(cfg, opts);
  CHECK(rep.pass);
  REQUIRE(rep.times.size() == 2);
  CHECK(rep.times[0].verdict == "PASS-empty");
  CHECK(rep.times[0].comparison_support_filtered.has_value());
  CHECK(rep.times[0].score_ratio < 1e-3);
  CHECK(rep.times[1].verdict == "PASS");
  for (const auto& r : rep.times[1].detected.rays.rays) CHECK(std::abs(r.base[0] + 2.0) <= 2 * cfg.L * 2 / cfg.n);
  CHECK(rep.times[1].composition_residual <= 1e-6);
  CHECK(rep.times[1].unitarity_drift <= 1e-9);

  for (const char* f : {"report.json", "comparison.csv", "rays.csv", "environment.json", "gabor_t1.csv",
                        "snapshots/t1.json", "snapshots/t1.bin"}) {
    CHECK(fs::exists(out / "stark" / f));
  }
  const Json report = read_json_file(out / "stark" / "report.json");
  CHECK(report["seed"] == 3);
  CHECK(report["times"][1]["solver"]["snapshot_sha256"] == rep.times[1].snapshot_sha256);
  CHECK(report["times"][1]["prediction_labels"]["bound"] == "upper bound");

  // Pipeline integrity: recompute the prediction from the stored cone and input rays.
  const Json& stored = report["times"][1];
  RecurrenceCone cone;
  cone.t = stored["cone"]["t"].get<double>();
  cone.tol = stored["cone"]["tol"].get<double>();
  cone.d = 1;
  for (const auto& dj : stored["cone"]["directions"]) {
    ConeDirection cd;
    cd.eta = vec_from_json(dj["eta"]);
    cd.xi = vec_from_json(dj["xi"]);
    cd.excess = dj["e"].get<int>();
    cd.tangent_basis = Mat(1, static_cast<Eigen::Index>(dj["tangent_basis"].size()));
    for (std::size_t k = 0; k < dj["tangent_basis"].size(); ++k) {
      cd.tangent_basis.col(static_cast<Eigen::Index>(k)) = vec_from_json(dj["tangent_basis"][k]);
    }
    cone.directions.push_back(cd);
  }
  const auto recomputed =
      propagate_full(wavefront_from_json(report["initial_wavefront"]), cone.t, cfg.symbol(), cone);
  CHECK(composition_residual(recomputed, wavefront_from_json(stored["predicted"])) <= 1e-12);

  // Second run hits the cache and reproduces the report byte for byte.
  const std::string first = dump(rep.json);
  const fs::path cached = opts.cache_dir.value();
  CHECK(std::distance(fs::directory_iterator(cached), fs::directory_iterator{}) == 4);
  opts.out_dir.clear();
  const auto again = run_scenario(cfg, opts);
  CHECK(dump(again.json) == first);
}

TEST_CASE("module errors carry the stage") {
  Json j = stark_config(0.5);
  j["detector"]["scales"] = Json::array({0.02, 0.04});
  const auto cfg = parse_scenario(j);
  std::string stage;
  try {
    run_scenario(cfg);
  } catch (const StageError& e) {
    stage = e.stage();
    CHECK(e.record()["kind"] == to_string(ErrorKind::InsufficientScales));
  }
  CHECK(stage == "detect");

  const auto reports = run_scenarios({cfg, parse_scenario(stark_config(0.25))}, RunOptions{{}, {}, 2, {}});
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].json.contains("error"));
  CHECK(reports[1].pass);
}
