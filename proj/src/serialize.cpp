#include "wavefront_lab/serialize.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wfl {

namespace fs = std::filesystem;

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i).transpose())));
  return rows;
}

Vec vec_from_json(const Json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw Error(ErrorKind::Config, "expected a number list");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::Config, "expected a number list");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json to_json(const FlowMap& f) {
  Json j;
  j["t"] = f.t;
  j["value"] = to_json(f.value.stacked());
  Json flat = Json::array();
  for (Eigen::Index r = 0; r < f.jacobian.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.jacobian.cols(); ++c) flat.push_back(f.jacobian(r, c));
  }
  j["jacobian"] = flat;
  j["error_estimate"] = f.error_estimate;
  return j;
}

Json to_json(const RecurrenceCone& c) {
  Json j;
  j["t"] = c.t;
  j["tol"] = c.tol;
  Json dirs = Json::array();
  for (const auto& d : c.directions) {
    Json e;
    e["eta"] = to_json(d.eta);
    e["xi"] = to_json(d.xi);
    e["e"] = d.excess;
    Json basis = Json::array();
    for (Eigen::Index k = 0; k < d.tangent_basis.cols(); ++k) basis.push_back(to_json(Vec(d.tangent_basis.col(k))));
    e["tangent_basis"] = basis;
    e["residual"] = d.residual;
    dirs.push_back(e);
  }
  j["directions"] = dirs;
  if (!c.warnings.empty()) j["warnings"] = c.warnings;
  return j;
}

Json to_json(const WavefrontSet& wf) {
  Json j;
  j["compact_support"] = wf.compact_support;
  j["bound"] = to_string(wf.bound);
  Json rays = Json::array();
  for (const auto& r : wf.rays) {
    Json e;
    e["base"] = to_json(r.base);
    e["dir"] = to_json(r.dir);
    e["weight"] = r.weight;
    if (r.family >= 0) e["family"] = r.family;
    rays.push_back(e);
  }
  j["rays"] = rays;
  if (!wf.families.empty()) {
    Json fams = Json::array();
    for (const auto& f : wf.families) {
      Json e;
      e["anchor"] = to_json(f.anchor);
      Json span = Json::array();
      for (Eigen::Index k = 0; k < f.span.cols(); ++k) span.push_back(to_json(Vec(f.span.col(k))));
      e["span"] = span;
      e["dir"] = to_json(f.dir);
      e["half_width"] = f.half_width;
      fams.push_back(e);
    }
    j["families"] = fams;
  }
  return j;
}

WavefrontSet wavefront_from_json(const Json& j) {
  WavefrontSet wf;
  wf.compact_support = j.value("compact_support", true);
  if (j.contains("bound")) {
    const std::string b = j["bound"].get<std::string>();
    for (BoundKind k : {BoundKind::Exact, BoundKind::UpperBound, BoundKind::InnerBoundOnly}) {
      if (b == to_string(k)) wf.bound = k;
    }
  }
  if (!j.contains("rays") || !j["rays"].is_array()) throw Error(ErrorKind::Config, "wavefront set needs a rays list");
  for (const auto& r : j["rays"]) {
    if (!r.contains("base") || !r.contains("dir")) throw Error(ErrorKind::Config, "ray needs base and dir");
    const Vec base = vec_from_json(r["base"]);
    const Vec dir = vec_from_json(r["dir"]);
    if (base.size() != dir.size() || dir.norm() == 0.0) throw Error(ErrorKind::Config, "malformed ray");
    Ray ray = make_ray(base, dir, r.value("weight", 1.0));
    ray.family = r.value("family", -1);
    wf.rays.push_back(ray);
  }
  if (j.contains("families")) {
    for (const auto& f : j["families"]) {
      AffineFamily fam;
      fam.anchor = vec_from_json(f["anchor"]);
      fam.dir = vec_from_json(f["dir"]);
      fam.half_width = f.value("half_width", 0.0);
      const auto& span = f["span"];
      fam.span = Mat(fam.anchor.size(), static_cast<Eigen::Index>(span.size()));
      for (std::size_t k = 0; k < span.size(); ++k) fam.span.col(static_cast<Eigen::Index>(k)) = vec_from_json(span[k]);
      wf.families.push_back(fam);
    }
  }
  return wf;
}

Json to_json(const std::vector<IsoRay>& rays) {
  Json a = Json::array();
  for (const auto& r : rays) a.push_back(Json{{"dir", to_json(r.dir)}});
  return a;
}

Json to_json(const DetectionResult& r) {
  Json j = to_json(r.rays);
  j["decay_exponents"] = r.decay_exponents;
  j["threshold"] = r.threshold;
  j["smoothness_cutoff"] = r.smoothness_cutoff;
  j["scales"] = r.scales;
  j["peak_score"] = r.peak_score;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

Json to_json(const ComparisonReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["n_detected"] = r.n_detected;
  j["n_predicted"] = r.n_predicted;
  j["detected_to_predicted"] = r.detected_to_predicted;
  j["predicted_to_detected"] = r.predicted_to_detected;
  j["coverage"] = r.coverage;
  j["unmatched"] = r.unmatched;
  j["base_tol"] = r.base_tol;
  j["angle_tol"] = r.angle_tol;
  return j;
}

Json to_json(const BoundednessReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["m"] = r.m;
  j["pass"] = r.pass;
  j["max_slope"] = r.max_slope;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"alpha", row.alpha},
                        {"y", to_json(row.y)},
                        {"lambda", row.lambda},
                        {"magnitude", row.magnitude},
                        {"slope", row.slope},
                        {"pass", row.pass}});
  }
  j["rows"] = rows;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const ValidationReport& r) {
  Json j;
  j["ok"] = r.ok();
  j["elliptic"] = r.elliptic;
  j["ellipticity_min"] = r.ellipticity_min;
  j["real_valued"] = r.real_valued;
  Json comps = Json::array();
  for (const auto& c : r.components) {
    comps.push_back(Json{{"degree", c.degree},
                         {"homogeneous", c.homogeneous},
                         {"max_homogeneity_residual", c.max_homogeneity_residual}});
  }
  j["components"] = comps;
  return j;
}

namespace {

std::vector<int> parse_exponent_key(const std::string& key) {
  std::string s = key;
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '[' || c == ']' || c == '(' || c == ')' || c == ' '; }),
          s.end());
  std::vector<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v < 0) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "bad monomial exponent key: " + key);
    }
  }
  return out;
}

}  // namespace

HomogeneousComponent component_from_json(const Json& j, int d, int degree) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "symbol component must be an object");
  const std::string form = j.value("form", "poly");
  if (form == "oscillator") {
    if (degree != 2) throw Error(ErrorKind::Config, "oscillator form is only valid for p2");
    const Vec w = vec_from_json(j.at("omegas"));
    if (w.size() != d) throw Error(ErrorKind::Config, "omegas must have d entries");
    return oscillator_p2(std::vector<double>(w.data(), w.data() + w.size()));
  }
  if (form == "linear") {
    if (degree != 1) throw Error(ErrorKind::Config, "linear form is only valid for p1");
    const Vec c = j.contains("c") ? vec_from_json(j["c"]) : Vec::Zero(d);
    const Vec b = j.contains("b") ? vec_from_json(j["b"]) : Vec::Zero(d);
    if (c.size() != d || b.size() != d) throw Error(ErrorKind::Config, "c and b must have d entries");
    return linear_p1(c, b);
  }
  if (form != "poly") throw Error(ErrorKind::Config, "unknown symbol form: " + form);
  if (!j.contains("monomials")) throw Error(ErrorKind::Config, "poly component needs monomials");
  std::vector<Monomial> ms;
  const auto& m = j["monomials"];
  if (m.is_object()) {
    for (const auto& [key, coef] : m.items()) {
      if (!coef.is_number()) throw Error(ErrorKind::Config, "monomial coefficient must be a number");
      ms.push_back({parse_exponent_key(key), coef.get<double>()});
    }
  } else if (m.is_array()) {
    for (const auto& e : m) {
      if (!e.contains("exponents") || !e.contains("coef")) {
        throw Error(ErrorKind::Config, "monomial entries need exponents and coef");
      }
      ms.push_back({e["exponents"].get<std::vector<int>>(), e["coef"].get<double>()});
    }
  } else {
    throw Error(ErrorKind::Config, "monomials must be an object or a list");
  }
  for (const auto& mono : ms) {
    if (static_cast<int>(mono.exponents.size()) != 2 * d) {
      throw Error(ErrorKind::Config, "monomial exponent tuples need 2d entries");
    }
  }
  return HomogeneousComponent::polynomial(d, degree, std::move(ms));
}

Json to_json(const HomogeneousComponent& c) {
  Json j;
  j["form"] = "poly";
  j["degree"] = c.degree();
  Json ms = Json::object();
  for (const auto& m : c.monomials()) {
    std::string key;
    for (std::size_t i = 0; i < m.exponents.size(); ++i) key += (i ? "," : "") + std::to_string(m.exponents[i]);
    ms[key] = m.coef;
  }
  j["monomials"] = ms;
  return j;
}

ClassicalSymbol symbol_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "symbol spec must be an object");
  if (!j.contains("d") || !j["d"].is_number_integer()) throw Error(ErrorKind::Config, "symbol spec needs integer d");
  const int d = j["d"].get<int>();
  if (d < 1 || d > 2) throw Error(ErrorKind::Config, "symbol dimension must be 1 or 2");
  if (!j.contains("p2")) throw Error(ErrorKind::Config, "symbol spec is missing \"p2\"");
  HomogeneousComponent p2 = component_from_json(j["p2"], d, 2);
  std::optional<HomogeneousComponent> p1;
  if (j.contains("p1") && !j["p1"].is_null()) p1 = component_from_json(j["p1"], d, 1);
  return ClassicalSymbol(d, std::move(p2), std::move(p1));
}

QuadraticHamiltonianSpec hamiltonian_from_symbol(const ClassicalSymbol& p) {
  const int d = p.dimension();
  const auto a = p.quadratic_matrix();
  if (!a) throw Error(ErrorKind::Unsupported, "quantum solves need a polynomial p2");
  const Mat& A = *a;
  std::vector<double> omegas;
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) {
      const double xx = A(i, k), xixi = A(d + i, d + k), mixed = A(i, d + k);
      const double want_xixi = i == k ? 1.0 : 0.0;
      if ((i != k && std::abs(xx) > 1e-12) || std::abs(xixi - want_xixi) > 1e-12 || std::abs(mixed) > 1e-12) {
        throw Error(ErrorKind::Unsupported, "quantum solves need p2 = (|xi|^2 + sum w_j^2 x_j^2) / 2");
      }
    }
    if (!(A(i, i) > 0.0)) throw Error(ErrorKind::Unsupported, "oscillator frequencies must be positive");
    omegas.push_back(std::sqrt(A(i, i)));
  }
  auto spec = QuadraticHamiltonianSpec::oscillator(omegas);
  if (p.has_p1()) {
    const auto cb = p.p1().linear_coefficients();
    if (!cb) throw Error(ErrorKind::Unsupported, "quantum solves need a linear p1");
    spec.c = cb->first;
    spec.b = cb->second;
  }
  return spec;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

namespace {

std::string state_bytes(const GridState& s) {
  std::string bytes(s.values.size() * 2 * sizeof(double), '\0');
  char* out = bytes.data();
  for (const auto& v : s.values) {
    const double parts[2] = {v.real(), v.imag()};
    std::memcpy(out, parts, sizeof(parts));
    out += sizeof(parts);
  }
  return bytes;
}

}  // namespace

std::string state_hash(const GridState& s) { return sha256_hex(state_bytes(s)); }

SnapshotFiles write_snapshot(const GridState& s, const fs::path& dir, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  SnapshotFiles out;
  out.data = dir / (stem + ".bin");
  out.sidecar = dir / (stem + ".json");
  const std::string bytes = state_bytes(s);
  out.sha256 = sha256_hex(bytes);
  {
    std::ofstream f(out.data, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + out.data.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  Json side;
  side["d"] = s.d;
  side["n"] = s.n;
  side["L"] = s.L;
  side["t"] = s.t;
  side["dtype"] = "complex128-le";
  side["data"] = out.data.filename().string();
  side["sha256"] = out.sha256;
  if (!s.warnings.empty()) side["warnings"] = s.warnings;
  write_text_file(out.sidecar, dump(side));
  return out;
}

GridState read_snapshot(const fs::path& path) {
  fs::path sidecar = path;
  if (path.extension() == ".bin") sidecar.replace_extension(".json");
  const Json side = read_json_file(sidecar);
  for (const char* key : {"d", "n", "L", "t", "data"}) {
    if (!side.contains(key)) throw Error(ErrorKind::Config, std::string("snapshot sidecar is missing ") + key);
  }
  GridState s(side["d"].get<int>(), side["n"].get<int>(), side["L"].get<double>());
  s.t = side["t"].get<double>();
  if (side.contains("warnings")) s.warnings = side["warnings"].get<std::vector<std::string>>();
  const fs::path data = sidecar.parent_path() / side["data"].get<std::string>();
  std::ifstream f(data, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + data.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() != s.values.size() * 2 * sizeof(double)) {
    throw Error(ErrorKind::Io, "snapshot size does not match its sidecar: " + data.string());
  }
  if (side.contains("sha256") && sha256_hex(bytes) != side["sha256"].get<std::string>()) {
    throw Error(ErrorKind::Io, "snapshot hash mismatch: " + data.string());
  }
  const char* in = bytes.data();
  for (auto& v : s.values) {
    double parts[2];
    std::memcpy(parts, in, sizeof(parts));
    in += sizeof(parts);
    v = cplx(parts[0], parts[1]);
  }
  return s;
}

Json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace wfl
