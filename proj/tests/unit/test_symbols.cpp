#include <doctest.h>

#include "wavefront_lab/symbols.hpp"

#include <random>

using namespace wfl;

namespace {

Vec z2(double a, double b) {
  Vec z(2);
  z << a, b;
  return z;
}

HomogeneousComponent xi_times_x() {
  return HomogeneousComponent::polynomial(1, 2, {Monomial{{1, 1}, 1.0}});
}

HomogeneousComponent oscillator_expression() {
  return HomogeneousComponent::expression(
      1, 2, [](const Vec& z) { return 0.5 * (z[0] * z[0] + z[1] * z[1]); }, "ho");
}

}  // namespace

TEST_CASE("eval on oscillator and linear components") {
  CHECK(oscillator_p2({1.0}).eval(z2(3, 4)) == doctest::Approx(12.5));
  CHECK(linear_p1(Vec::Constant(1, 2.0), Vec::Zero(1)).eval(z2(3, 4)) == doctest::Approx(6.0));
  CHECK(oscillator_p2({2.0}).eval(z2(1, 0)) == doctest::Approx(2.0));
}

TEST_CASE("eval rejects non-finite expression values") {
  auto bad = HomogeneousComponent::expression(
      1, 0, [](const Vec& z) { return z[0] / (z[0] * z[0] + z[1] * z[1]) * 0.0 + 1.0 / z[0]; });
  CHECK_THROWS_AS(bad.eval(z2(0, 1)), Error);
}

TEST_CASE("grad of polynomial components") {
  const Vec g = oscillator_p2({1.0}).grad(z2(3, 4));
  CHECK(g[0] == doctest::Approx(3.0));
  CHECK(g[1] == doctest::Approx(4.0));
  const Vec gb = linear_p1(Vec::Zero(1), Vec::Constant(1, 5.0)).grad(z2(-7, 0.25));
  CHECK(gb[0] == doctest::Approx(0.0));
  CHECK(gb[1] == doctest::Approx(5.0));
}

TEST_CASE("expression gradient agrees with polynomial twin") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5, 5);
  const auto poly = oscillator_p2({1.0});
  const auto expr = oscillator_expression();
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Vec z = z2(u(rng), u(rng));
    worst = std::max(worst, (poly.grad(z) - expr.grad(z)).norm());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("grad matches second-order finite differences on random points") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1), r(0.5, 10.0);
  // A nontrivial d = 2 quadratic with cross terms.
  auto p2 = HomogeneousComponent::polynomial(
      2, 2,
      {Monomial{{2, 0, 0, 0}, 0.7}, Monomial{{1, 1, 0, 0}, -0.3}, Monomial{{0, 0, 2, 0}, 0.5},
       Monomial{{1, 0, 0, 1}, 0.2}, Monomial{{0, 0, 0, 2}, 1.1}});
  for (int i = 0; i < 50; ++i) {
    Vec z(4);
    for (int k = 0; k < 4; ++k) z[k] = u(rng);
    z *= r(rng) / z.norm();
    const Vec g = p2.grad(z);
    const double h = 1e-5 * z.norm();
    for (int k = 0; k < 4; ++k) {
      Vec a = z, b = z;
      a[k] += h;
      b[k] -= h;
      const double fd = (p2.eval(a) - p2.eval(b)) / (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("polynomial hessian equals quadratic matrix") {
  const ClassicalSymbol p = oscillator_symbol({1.0, 2.0});
  const Mat a = *p.quadratic_matrix();
  CHECK(a(0, 0) == doctest::Approx(1.0));
  CHECK(a(1, 1) == doctest::Approx(4.0));
  CHECK(a(2, 2) == doctest::Approx(1.0));
  CHECK(a(3, 3) == doctest::Approx(1.0));
  CHECK(std::abs(a(0, 1)) < 1e-15);
}

TEST_CASE("validate: oscillator family") {
  auto rep = validate(oscillator_symbol({1.0}));
  CHECK(rep.elliptic);
  CHECK(rep.ellipticity_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.ok());

  auto aniso = validate(oscillator_symbol({2.0}));
  CHECK(aniso.elliptic);
  CHECK(aniso.ellipticity_min == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("validate: non-elliptic principal symbols") {
  CHECK_FALSE(validate(ClassicalSymbol(1, xi_times_x())).elliptic);
  auto free_particle = HomogeneousComponent::polynomial(1, 2, {Monomial{{0, 2}, 0.5}});
  CHECK_FALSE(validate(ClassicalSymbol(1, free_particle)).elliptic);
  auto free2 = HomogeneousComponent::polynomial(
      2, 2, {Monomial{{0, 0, 2, 0}, 0.5}, Monomial{{0, 0, 0, 2}, 0.5}});
  CHECK_FALSE(validate(ClassicalSymbol(2, free2)).elliptic);
}

TEST_CASE("validate: homogeneity residuals") {
  auto rep = validate(ClassicalSymbol(1, oscillator_expression()));
  CHECK(rep.components[0].max_homogeneity_residual <= 1e-10);
  CHECK(rep.ok());

  // Declared degree 2 but actually of mixed degree.
  auto wrong = HomogeneousComponent::expression(
      1, 2, [](const Vec& z) { return z[0] * z[0] + z[1] * z[1] + z[0]; });
  auto bad = validate(ClassicalSymbol(1, wrong));
  CHECK_FALSE(bad.components[0].homogeneous);
  CHECK_FALSE(bad.ok());
}

TEST_CASE("polynomial construction checks degrees") {
  CHECK_THROWS_AS(HomogeneousComponent::polynomial(1, 2, {Monomial{{1, 0}, 1.0}}), Error);
  CHECK_THROWS_AS(HomogeneousComponent::polynomial(1, 2, {Monomial{{1, 0, 1}, 1.0}}), Error);
  CHECK_THROWS_AS(ClassicalSymbol(1, linear_p1(Vec::Ones(1), Vec::Zero(1))), Error);
}

TEST_CASE("linear coefficients round trip") {
  Vec c(2), b(2);
  c << 0.5, -1.0;
  b << 2.0, 0.0;
  auto lc = linear_p1(c, b).linear_coefficients();
  REQUIRE(lc);
  CHECK((lc->first - c).norm() == 0.0);
  CHECK((lc->second - b).norm() == 0.0);
}

TEST_CASE("sphere sample is deterministic and normalized") {
  auto a = sphere_sample(4, 256, 3);
  auto b = sphere_sample(4, 256, 3);
  REQUIRE(a.size() == 256);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i].norm() - 1.0) < 1e-14);
    CHECK((a[i] - b[i]).norm() == 0.0);
  }
}
