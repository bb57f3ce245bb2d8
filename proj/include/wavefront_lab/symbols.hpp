#pragma once

#include "wavefront_lab/common.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace wfl {

// A point (x, xi) of phase space R^{2d}. Most numerical routines work on the
// stacked vector z = (x, xi).
struct PhasePoint {
  Vec x;
  Vec xi;

  PhasePoint() = default;
  PhasePoint(Vec x_, Vec xi_);

  static PhasePoint from_stacked(const Vec& z);
  Vec stacked() const;
  int dimension() const { return static_cast<int>(x.size()); }
};

// Exponents are ordered (x_1..x_d, xi_1..xi_d).
struct Monomial {
  std::vector<int> exponents;
  double coef = 0.0;
};

// One homogeneous term of a classical isotropic symbol: either a polynomial
// with every monomial of total degree `degree`, or a closed-form function
// with declared homogeneity.
class HomogeneousComponent {
 public:
  using Expression = std::function<double(const Vec&)>;

  static HomogeneousComponent polynomial(int d, int degree, std::vector<Monomial> monomials);
  static HomogeneousComponent expression(int d, int degree, Expression f, std::string label = {});
  static HomogeneousComponent zero(int d, int degree);

  int degree() const { return degree_; }
  int dimension() const { return d_; }
  bool is_polynomial() const { return !expr_; }
  bool is_zero() const { return !expr_ && monomials_.empty(); }
  const std::vector<Monomial>& monomials() const { return monomials_; }
  const std::string& label() const { return label_; }

  double eval(const Vec& z) const;
  double eval(const PhasePoint& p) const { return eval(p.stacked()); }
  Vec grad(const Vec& z) const;
  Mat hessian(const Vec& z) const;

  // |f(lambda z) - lambda^m f(z)| / (lambda^m (1 + |f(z)|)).
  double homogeneity_residual(const Vec& z, double lambda) const;

  // Coefficients of a degree-1 polynomial as (c, b) with f = c.x + b.xi.
  std::optional<std::pair<Vec, Vec>> linear_coefficients() const;

 private:
  HomogeneousComponent() = default;

  int d_ = 1;
  int degree_ = 0;
  std::vector<Monomial> monomials_;
  Expression expr_;
  std::string label_;
};

class ClassicalSymbol {
 public:
  ClassicalSymbol(int d, HomogeneousComponent p2,
                  std::optional<HomogeneousComponent> p1 = std::nullopt,
                  std::optional<HomogeneousComponent> p0 = std::nullopt);

  int dimension() const { return d_; }
  const HomogeneousComponent& p2() const { return p2_; }
  const HomogeneousComponent& p1() const { return p1_; }
  const std::optional<HomogeneousComponent>& p0() const { return p0_; }
  bool has_p1() const { return !p1_.is_zero(); }

  // Symmetric A with p2(z) = z^T A z / 2 when p2 is a polynomial.
  std::optional<Mat> quadratic_matrix() const;

  ClassicalSymbol with_p1(HomogeneousComponent p1) const;

 private:
  int d_;
  HomogeneousComponent p2_;
  HomogeneousComponent p1_;
  std::optional<HomogeneousComponent> p0_;
};

struct ComponentCheck {
  int degree = 0;
  double max_homogeneity_residual = 0.0;
  bool homogeneous = true;
};

struct ValidationReport {
  std::vector<ComponentCheck> components;
  double ellipticity_min = 0.0;
  bool elliptic = false;
  bool real_valued = true;
  bool ok() const;
};

// Quasi-uniform sample of the unit sphere in R^dim. For dim == 2 the points
// are equally spaced angles; otherwise coordinate axes followed by normalized
// Gaussian draws from a seeded generator.
std::vector<Vec> sphere_sample(int dim, int count, std::uint64_t seed);

ValidationReport validate(const ClassicalSymbol& p, std::uint64_t seed = 0);

// Convenience constructors for the oscillator family used throughout.
HomogeneousComponent oscillator_p2(const std::vector<double>& omegas);
HomogeneousComponent linear_p1(const Vec& c_x, const Vec& b_xi);
ClassicalSymbol oscillator_symbol(const std::vector<double>& omegas);

}  // namespace wfl
