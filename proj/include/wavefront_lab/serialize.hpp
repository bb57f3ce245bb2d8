#pragma once

#include "wavefront_lab/detector.hpp"
#include "wavefront_lab/flow.hpp"
#include "wavefront_lab/quantum.hpp"
#include "wavefront_lab/recurrence.hpp"
#include "wavefront_lab/statphase.hpp"
#include "wavefront_lab/wfpredict.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace wfl {

using Json = nlohmann::ordered_json;

Json to_json(const Vec& v);
Json to_json(const Mat& m);  // list of rows
Vec vec_from_json(const Json& j);

Json to_json(const FlowMap& f);  // {t, value, jacobian} with the jacobian row-major
Json to_json(const RecurrenceCone& c);
Json to_json(const WavefrontSet& wf);
WavefrontSet wavefront_from_json(const Json& j);
Json to_json(const std::vector<IsoRay>& rays);
Json to_json(const DetectionResult& r);
Json to_json(const ComparisonReport& r);
Json to_json(const BoundednessReport& r);
Json to_json(const ValidationReport& r);

// Symbol spec: {"d": 2, "p2": {"form": "poly", "monomials": {...}}, "p1": {...}}.
// Monomials are either an object keyed by exponent tuples ("2,0,0,0" or
// "[2,0,0,0]") or a list of {"exponents": [...], "coef": c}. Also accepted:
// {"form": "oscillator", "omegas": [...]} for p2 and {"form": "linear", "c": [...], "b": [...]} for p1.
ClassicalSymbol symbol_from_json(const Json& j);
HomogeneousComponent component_from_json(const Json& j, int d, int degree);
Json to_json(const HomogeneousComponent& c);

// Oscillator + linear p1 view of a symbol spec; throws Unsupported when the
// spec is not of that form.
QuadraticHamiltonianSpec hamiltonian_from_symbol(const ClassicalSymbol& p);

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& s);
std::string state_hash(const GridState& s);

// Raw little-endian complex128 values plus a JSON sidecar
// {d, n, L, t, dtype, data, sha256}.
struct SnapshotFiles {
  std::filesystem::path data;
  std::filesystem::path sidecar;
  std::string sha256;
};

SnapshotFiles write_snapshot(const GridState& s, const std::filesystem::path& dir, const std::string& stem);
// Accepts the sidecar or the data file; verifies the hash.
GridState read_snapshot(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Fixed formatting for reports: shortest round-trip doubles.
std::string dump(const Json& j);

}  // namespace wfl
