#include "wavefront_lab/symbols.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace wfl {

PhasePoint::PhasePoint(Vec x_, Vec xi_) : x(std::move(x_)), xi(std::move(xi_)) {
  if (x.size() != xi.size()) {
    throw Error(ErrorKind::EvaluationDomain, "phase point: x and xi differ in dimension");
  }
}

PhasePoint PhasePoint::from_stacked(const Vec& z) {
  const Eigen::Index d = z.size() / 2;
  return PhasePoint(z.head(d), z.tail(d));
}

Vec PhasePoint::stacked() const {
  Vec z(x.size() + xi.size());
  z << x, xi;
  return z;
}

namespace {

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

double monomial_value(const Monomial& m, const Vec& z) {
  double v = m.coef;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (m.exponents[k] != 0) v *= ipow(z[k], m.exponents[k]);
  }
  return v;
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::EvaluationDomain, what + " evaluated to a non-finite value");
  }
}

}  // namespace

HomogeneousComponent HomogeneousComponent::polynomial(int d, int degree,
                                                      std::vector<Monomial> monomials) {
  HomogeneousComponent c;
  c.d_ = d;
  c.degree_ = degree;
  for (auto& m : monomials) {
    if (static_cast<int>(m.exponents.size()) != 2 * d) {
      throw Error(ErrorKind::Config, "monomial exponent tuple must have length 2d");
    }
    const int total = std::accumulate(m.exponents.begin(), m.exponents.end(), 0);
    if (total != degree) {
      std::ostringstream os;
      os << "monomial of total degree " << total << " in a degree-" << degree << " component";
      throw Error(ErrorKind::Config, os.str());
    }
    for (int e : m.exponents) {
      if (e < 0) throw Error(ErrorKind::Config, "negative exponent in monomial");
    }
    if (m.coef != 0.0) c.monomials_.push_back(std::move(m));
  }
  return c;
}

HomogeneousComponent HomogeneousComponent::expression(int d, int degree, Expression f,
                                                      std::string label) {
  if (!f) throw Error(ErrorKind::Config, "empty expression component");
  HomogeneousComponent c;
  c.d_ = d;
  c.degree_ = degree;
  c.expr_ = std::move(f);
  c.label_ = std::move(label);
  return c;
}

HomogeneousComponent HomogeneousComponent::zero(int d, int degree) {
  return polynomial(d, degree, {});
}

double HomogeneousComponent::eval(const Vec& z) const {
  double v = 0.0;
  if (expr_) {
    v = expr_(z);
  } else {
    for (const auto& m : monomials_) v += monomial_value(m, z);
  }
  check_finite(v, "symbol component");
  return v;
}

Vec HomogeneousComponent::grad(const Vec& z) const {
  const Eigen::Index n = z.size();
  Vec g = Vec::Zero(n);
  if (expr_) {
    // Fourth-order central stencil.
    const double step = 1e-3 * std::max(1.0, z.norm());
    Vec zp = z;
    auto at = [&](Eigen::Index k, double s) {
      zp[k] = z[k] + s;
      const double v = eval(zp);
      zp[k] = z[k];
      return v;
    };
    for (Eigen::Index k = 0; k < n; ++k) {
      g[k] = (-at(k, 2 * step) + 8.0 * at(k, step) - 8.0 * at(k, -step) + at(k, -2 * step)) /
             (12.0 * step);
    }
    return g;
  }
  for (const auto& m : monomials_) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const int e = m.exponents[k];
      if (e == 0) continue;
      double v = m.coef * e;
      for (Eigen::Index j = 0; j < n; ++j) {
        const int ej = (j == k) ? e - 1 : m.exponents[j];
        if (ej != 0) v *= ipow(z[j], ej);
      }
      g[k] += v;
    }
  }
  return g;
}

Mat HomogeneousComponent::hessian(const Vec& z) const {
  const Eigen::Index n = z.size();
  Mat h = Mat::Zero(n, n);
  if (expr_) {
    // Fourth-order stencils on values; mixed terms by Richardson on the
    // four-point rule.
    const double step = 1e-3 * std::max(1.0, z.norm());
    Vec zp = z;
    auto at2 = [&](Eigen::Index a, double sa, Eigen::Index b, double sb) {
      zp[a] += sa;
      zp[b] += sb;
      const double v = eval(zp);
      zp[a] = z[a];
      zp[b] = z[b];
      return v;
    };
    const double f0 = eval(z);
    for (Eigen::Index a = 0; a < n; ++a) {
      h(a, a) = (-at2(a, 2 * step, a, 0.0) + 16.0 * at2(a, step, a, 0.0) - 30.0 * f0 +
                 16.0 * at2(a, -step, a, 0.0) - at2(a, -2 * step, a, 0.0)) /
                (12.0 * step * step);
      for (Eigen::Index b = a + 1; b < n; ++b) {
        auto mixed = [&](double s) {
          return (at2(a, s, b, s) - at2(a, s, b, -s) - at2(a, -s, b, s) + at2(a, -s, b, -s)) /
                 (4.0 * s * s);
        };
        h(a, b) = h(b, a) = (4.0 * mixed(step) - mixed(2 * step)) / 3.0;
      }
    }
    return h;
  }
  std::vector<int> e;
  for (const auto& m : monomials_) {
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        e = m.exponents;
        double v = m.coef;
        if (e[a] == 0) continue;
        v *= e[a];
        e[a] -= 1;
        if (e[b] == 0) continue;
        v *= e[b];
        e[b] -= 1;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (e[j] != 0) v *= ipow(z[j], e[j]);
        }
        h(a, b) += v;
      }
    }
  }
  return h;
}

double HomogeneousComponent::homogeneity_residual(const Vec& z, double lambda) const {
  const double f = eval(z);
  const double scale = ipow(lambda, degree_);
  return std::abs(eval(lambda * z) - scale * f) / (scale * (1.0 + std::abs(f)));
}

std::optional<std::pair<Vec, Vec>> HomogeneousComponent::linear_coefficients() const {
  if (expr_ || degree_ != 1) return std::nullopt;
  Vec c = Vec::Zero(d_);
  Vec b = Vec::Zero(d_);
  for (const auto& m : monomials_) {
    for (int k = 0; k < 2 * d_; ++k) {
      if (m.exponents[k] == 1) {
        if (k < d_) c[k] += m.coef;
        else b[k - d_] += m.coef;
      }
    }
  }
  return std::make_pair(c, b);
}

ClassicalSymbol::ClassicalSymbol(int d, HomogeneousComponent p2,
                                 std::optional<HomogeneousComponent> p1,
                                 std::optional<HomogeneousComponent> p0)
    : d_(d),
      p2_(std::move(p2)),
      p1_(p1 ? std::move(*p1) : HomogeneousComponent::zero(d, 1)),
      p0_(std::move(p0)) {
  if (d < 1) throw Error(ErrorKind::Config, "symbol dimension must be >= 1");
  if (p2_.degree() != 2 || p2_.dimension() != d) {
    throw Error(ErrorKind::Config, "principal component must have degree 2 and dimension d");
  }
  if (p1_.degree() != 1 || p1_.dimension() != d) {
    throw Error(ErrorKind::Config, "subprincipal component must have degree 1 and dimension d");
  }
  if (p0_ && (p0_->degree() != 0 || p0_->dimension() != d)) {
    throw Error(ErrorKind::Config, "degree-0 component must have degree 0 and dimension d");
  }
}

std::optional<Mat> ClassicalSymbol::quadratic_matrix() const {
  if (!p2_.is_polynomial()) return std::nullopt;
  // The Hessian of a quadratic polynomial is constant and equals A.
  return p2_.hessian(Vec::Zero(2 * d_));
}

ClassicalSymbol ClassicalSymbol::with_p1(HomogeneousComponent p1) const {
  return ClassicalSymbol(d_, p2_, std::move(p1), p0_);
}

bool ValidationReport::ok() const {
  if (!elliptic || !real_valued) return false;
  for (const auto& c : components) {
    if (!c.homogeneous) return false;
  }
  return true;
}

std::vector<Vec> sphere_sample(int dim, int count, std::uint64_t seed) {
  std::vector<Vec> pts;
  pts.reserve(count);
  if (dim == 1) {
    pts.push_back(Vec::Constant(1, 1.0));
    pts.push_back(Vec::Constant(1, -1.0));
    return pts;
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double th = 2.0 * kPi * k / count;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      pts.push_back(v);
    }
    return pts;
  }
  for (int k = 0; k < dim && static_cast<int>(pts.size()) < count; ++k) {
    pts.push_back(Vec::Unit(dim, k));
    pts.push_back(-Vec::Unit(dim, k));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  while (static_cast<int>(pts.size()) < count) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n > 1e-12) pts.push_back(v / n);
  }
  return pts;
}

ValidationReport validate(const ClassicalSymbol& p, std::uint64_t seed) {
  ValidationReport report;
  const int d = p.dimension();
  const auto homog_pts = sphere_sample(2 * d, 100, seed + 1);

  auto check = [&](const HomogeneousComponent& c) {
    ComponentCheck cc;
    cc.degree = c.degree();
    for (const auto& z : homog_pts) {
      for (double lambda : {2.0, 5.0, 10.0}) {
        cc.max_homogeneity_residual =
            std::max(cc.max_homogeneity_residual, c.homogeneity_residual(z, lambda));
      }
    }
    cc.homogeneous = cc.max_homogeneity_residual <= 1e-10;
    report.components.push_back(cc);
  };
  check(p.p2());
  check(p.p1());
  if (p.p0()) check(*p.p0());

  const auto sphere = sphere_sample(2 * d, 64 * d * d, seed);
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& z : sphere) {
    double v = 0.0;
    try {
      v = p.p2().eval(z);
    } catch (const Error&) {
      report.real_valued = false;
      continue;
    }
    min_abs = std::min(min_abs, std::abs(v));
  }
  report.ellipticity_min = min_abs;
  report.elliptic = report.real_valued && min_abs > 0.0;
  return report;
}

HomogeneousComponent oscillator_p2(const std::vector<double>& omegas) {
  const int d = static_cast<int>(omegas.size());
  std::vector<Monomial> ms;
  for (int j = 0; j < d; ++j) {
    Monomial mx{std::vector<int>(2 * d, 0), 0.5 * omegas[j] * omegas[j]};
    mx.exponents[j] = 2;
    Monomial mxi{std::vector<int>(2 * d, 0), 0.5};
    mxi.exponents[d + j] = 2;
    ms.push_back(mx);
    ms.push_back(mxi);
  }
  return HomogeneousComponent::polynomial(d, 2, std::move(ms));
}

HomogeneousComponent linear_p1(const Vec& c_x, const Vec& b_xi) {
  const int d = static_cast<int>(c_x.size());
  std::vector<Monomial> ms;
  for (int j = 0; j < d; ++j) {
    Monomial mx{std::vector<int>(2 * d, 0), c_x[j]};
    mx.exponents[j] = 1;
    Monomial mxi{std::vector<int>(2 * d, 0), b_xi[j]};
    mxi.exponents[d + j] = 1;
    ms.push_back(mx);
    ms.push_back(mxi);
  }
  return HomogeneousComponent::polynomial(d, 1, std::move(ms));
}

ClassicalSymbol oscillator_symbol(const std::vector<double>& omegas) {
  return ClassicalSymbol(static_cast<int>(omegas.size()), oscillator_p2(omegas));
}

}  // namespace wfl
