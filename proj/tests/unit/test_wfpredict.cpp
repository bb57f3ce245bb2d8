#include <doctest.h>

#include "oracles.hpp"
#include "wavefront_lab/wfpredict.hpp"

using namespace wfl;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

WavefrontSet single(const Vec& y, const Vec& eta, bool compact = true) {
  WavefrontSet wf;
  wf.compact_support = compact;
  wf.rays.push_back(make_ray(y, eta));
  return wf;
}

ClassicalSymbol stark(double c, int d = 1) {
  return oscillator_symbol(std::vector<double>(static_cast<std::size_t>(d), 1.0))
      .with_p1(linear_p1(Vec::Constant(d, c), Vec::Zero(d)));
}

// Test-side shift oracle for p1 = c.x on the unit oscillator:
// X_t p1(0, xi) = c.xi (1 - cos t).
double shift_oracle(double c, double t) { return c * (1.0 - std::cos(t)); }

}  // namespace

TEST_CASE("free propagation at t = pi reflects rays") {
  const auto p = oscillator_symbol({1.0});
  const auto cone = gamma_scan(p, kPi, 8, 1e-9);
  for (double s : {1.0, -1.0}) {
    const auto out = propagate_free(single(v1(0.7), v1(s)), kPi, p, cone);
    REQUIRE(out.rays.size() == 1);
    CHECK(out.rays[0].base[0] == doctest::Approx(-0.7).epsilon(1e-9));
    CHECK(out.rays[0].dir[0] == doctest::Approx(-s));
    CHECK(out.bound == BoundKind::UpperBound);
  }

  const auto p2 = oscillator_symbol({1.0, 1.0});
  const auto cone2 = gamma_scan(p2, kPi, 32, 1e-9);
  const Vec y = v2(0.4, -1.3);
  const Vec eta = cone2.directions[5].eta;
  const auto out = propagate_free(single(y, eta), kPi, p2, cone2);
  REQUIRE(out.rays.size() == 1);
  CHECK((out.rays[0].base + y).norm() <= 1e-8);
  CHECK((out.rays[0].dir + eta).norm() <= 1e-8);
}

TEST_CASE("free propagation between sampled cone directions") {
  const auto p = oscillator_symbol({1.0, 1.0});
  const auto cone = gamma_scan(p, kPi, 16, 1e-9);
  const Vec eta = v2(std::cos(0.2), std::sin(0.2));  // not a sample of the 16-gon
  REQUIRE(cone.find(eta, 1e-4) < 0);
  const auto out = propagate_free(single(v2(1.0, 2.0), eta), kPi, p, cone);
  REQUIRE(out.rays.size() == 1);
  CHECK((out.rays[0].base + v2(1.0, 2.0)).norm() <= 1e-8);
  CHECK((out.rays[0].dir + eta).norm() <= 1e-8);
}

TEST_CASE("free propagation off recurrence is empty for compact data") {
  const auto p = oscillator_symbol({1.0});
  const auto cone = gamma_scan(p, kPi / 2, 8, 1e-9);
  CHECK(propagate_free(single(v1(1.0), v1(1.0)), kPi / 2, p, cone).empty());
  const auto inner = propagate_free(single(v1(1.0), v1(1.0), false), kPi / 2, p, cone);
  CHECK(inner.bound == BoundKind::InnerBoundOnly);
  CHECK(std::string(to_string(inner.bound)) == "inner bound only");
}

TEST_CASE("anisotropic oscillator at t = pi/2: affine family on the recurring axis") {
  const auto p = oscillator_symbol({1.0, 2.0});
  const auto cone = gamma_scan(p, kPi / 2, 64, 1e-9);
  CHECK(propagate_free(single(v2(0.3, 0.5), v2(0.6, 0.8)), kPi / 2, p, cone).empty());

  // Closed form: the omega = 2 axis is at half period, x_2 -> -y_2, xi_2 -> -eta_2;
  // the omega = 1 axis is at quarter period, so x_1 is unconstrained.
  PredictOptions opts;
  opts.family_half_width = 4.0;
  const auto out = propagate_free(single(v2(0.3, 0.5), v2(0.0, 1.0)), kPi / 2, p, cone, opts);
  REQUIRE(out.families.size() == 1);
  CHECK(out.rays.size() == 33);
  const auto& fam = out.families[0];
  CHECK(std::abs(std::abs(fam.span(0, 0)) - 1.0) <= 1e-10);
  CHECK(fam.anchor[1] == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK((fam.dir - v2(0.0, -1.0)).norm() <= 1e-9);
  for (const auto& r : out.rays) {
    CHECK(r.base[1] == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(std::abs(r.base[0]) <= 4.0 + 1e-12);
    CHECK(r.family == 0);
  }
  CHECK(fam.distance(v2(2.0, -0.5)) <= 1e-9);
  CHECK(fam.distance(v2(2.0, 0.5)) == doctest::Approx(1.0));
  CHECK(fam.distance(v2(5.0, -0.5)) == doctest::Approx(1.0));
}

TEST_CASE("codirection scaling does not change the prediction") {
  const auto p = oscillator_symbol({1.0, 1.0});
  const auto cone = gamma_scan(p, kPi, 32, 1e-9);
  const Vec eta = cone.directions[3].eta;
  const auto oa = propagate_free(single(v2(0.2, 0.1), eta), kPi, p, cone);
  const auto ob = propagate_free(single(v2(0.2, 0.1), 2.0 * eta), kPi, p, cone);
  REQUIRE(oa.rays.size() == ob.rays.size());
  CHECK((oa.rays[0].base - ob.rays[0].base).norm() == 0.0);
}

TEST_CASE("whole-cone reading agrees for the oscillators") {
  const auto p = oscillator_symbol({1.0, 2.0});
  const auto cone = gamma_scan(p, kPi / 2, 64, 1e-9);
  PredictOptions opts;
  opts.whole_cone = true;
  const auto a = propagate_free(single(v2(0.3, 0.5), v2(0.0, 1.0)), kPi / 2, p, cone);
  const auto b = propagate_free(single(v2(0.3, 0.5), v2(0.0, 1.0)), kPi / 2, p, cone, opts);
  REQUIRE(a.rays.size() == b.rays.size());
  for (std::size_t i = 0; i < a.rays.size(); ++i) {
    CHECK((a.rays[i].base - b.rays[i].base).norm() <= 1e-12);
  }
}

TEST_CASE("propagate_reduced") {
  const auto wf = single(v1(1.0), v1(-1.0));
  const auto id = propagate_reduced(wf, kPi, oscillator_symbol({1.0}));
  CHECK(id.rays[0].base[0] == 1.0);
  CHECK(propagate_reduced(wf, 0.0, stark(0.5)).rays[0].base[0] == 1.0);

  for (double c : {0.25, 0.5}) {
    const auto out = propagate_reduced(wf, kPi, stark(c));
    CHECK(out.rays[0].base[0] == doctest::Approx(1.0 + shift_oracle(c, kPi)).epsilon(1e-8));
    CHECK(out.rays[0].dir[0] == -1.0);
    // The inverse map is the shift for -p1.
    const auto back = propagate_reduced(out, kPi, stark(-c));
    CHECK(std::abs(back.rays[0].base[0] - 1.0) <= 1e-10);
  }
}

TEST_CASE("propagate_full on the shifted isotropic oscillator") {
  for (double c : {0.25, 0.5}) {
    const auto p = stark(c);
    for (int k : {1, 2}) {
      const double t = k * kPi;
      const auto cone = gamma_scan(p, t, 8, 1e-9);
      const auto out = propagate_full(single(v1(1.0), v1(1.0)), t, p, cone);
      REQUIRE(out.rays.size() == 1);
      const double sign = k % 2 ? -1.0 : 1.0;
      CHECK(out.rays[0].base[0] ==
            doctest::Approx(sign * (1.0 + shift_oracle(c, t))).epsilon(1e-8));
      CHECK(out.rays[0].dir[0] == doctest::Approx(sign));
    }
    const auto cone = gamma_scan(p, 1.0, 8, 1e-9);
    CHECK(propagate_full(single(v1(1.0), v1(1.0)), 1.0, p, cone).empty());
  }
}

TEST_CASE("propagate_full with p1 = 0 is propagate_free") {
  const auto p = oscillator_symbol({1.0, 2.0});
  const auto cone = gamma_scan(p, kPi / 2, 64, 1e-9);
  const auto wf = single(v2(0.3, 0.5), v2(0.0, 1.0));
  const auto a = propagate_full(wf, kPi / 2, p, cone);
  const auto b = propagate_free(wf, kPi / 2, p, cone);
  REQUIRE(a.rays.size() == b.rays.size());
  for (std::size_t i = 0; i < a.rays.size(); ++i) CHECK((a.rays[i].base - b.rays[i].base).norm() == 0.0);
}

TEST_CASE("propagate_full in two dimensions") {
  Vec c(2);
  c << 0.5, -0.25;
  const auto p = oscillator_symbol({1.0, 1.0}).with_p1(linear_p1(c, Vec::Zero(2)));
  const auto cone = gamma_scan(p, kPi, 32, 1e-9);
  const Vec eta = cone.directions[7].eta;
  const auto out = propagate_full(single(v2(1.0, -1.0), eta), kPi, p, cone);
  REQUIRE(out.rays.size() == 1);
  CHECK((out.rays[0].base + v2(1.0, -1.0) + 2.0 * c).norm() <= 1e-7);
}

TEST_CASE("propagate_full preconditions and degenerate systems") {
  const auto p = stark(0.5);
  const auto cone = gamma_scan(p, kPi, 8, 1e-9);
  CHECK_THROWS_AS(propagate_full(single(v1(1.0), v1(1.0), false), kPi, p, cone), Error);

  // A hand-built cone at a quarter period: dXi/deta vanishes there.
  RecurrenceCone fake;
  fake.t = kPi / 2;
  fake.tol = 1e-9;
  fake.d = 1;
  ConeDirection cd;
  cd.eta = v1(1.0);
  cd.xi = v1(1.0);
  cd.excess = 1;
  cd.tangent_basis = Mat::Identity(1, 1);
  fake.directions.push_back(cd);
  try {
    propagate_free(single(v1(1.0), v1(1.0)), kPi / 2, oscillator_symbol({1.0}), fake);
    FAIL("expected a degenerate-recurrence error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateRecurrence);
  }
  CHECK_THROWS_AS(propagate_free(single(v1(1.0), v1(1.0)), 1.0, p, cone), Error);
}

TEST_CASE("propagate_iso") {
  const auto p = oscillator_symbol({1.0, 2.0});
  std::vector<IsoRay> in;
  for (double a : {0.1, 1.3, 2.9}) {
    Vec z(4);
    z << 0.0, 0.0, std::cos(a), std::sin(a);
    in.push_back(IsoRay{z});
  }
  const auto same = propagate_iso(in, 0.0, p);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK((same[i].dir - in[i].dir).norm() == 0.0);

  const auto iso = oscillator_symbol({1.0, 1.0});
  const auto anti = propagate_iso(in, kPi, iso);
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK((anti[i].dir + in[i].dir).norm() <= 1e-12);
    CHECK(anti[i].dir.head(2).norm() <= 1e-12);
  }

  const auto fwd = propagate_iso(in, 1.7, p);
  const auto back = propagate_iso(fwd, -1.7, p);
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK((back[i].dir - in[i].dir).norm() <= 1e-8);
    const Vec oracle_dir = oracle::oscillator_flow({1.0, 2.0}, in[i].dir, 1.7).normalized();
    CHECK((fwd[i].dir - oracle_dir).norm() <= 1e-12);
  }
}

TEST_CASE("xi_derivative cross-check") {
  const auto p = oscillator_symbol({1.0, 2.0});
  const Mat m = xi_derivative(p, kPi / 2, v2(0.0, 1.0), Mat::Identity(2, 2));
  CHECK(std::abs(m(0, 0)) <= 1e-12);
  CHECK(m(1, 1) == doctest::Approx(-1.0));
}
