#include "wavefront_lab/flow.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>

namespace wfl {

QuadraticForm::QuadraticForm(const Mat& matrix) : a_(0.5 * (matrix + matrix.transpose())) {
  if (a_.rows() != a_.cols() || a_.rows() % 2 != 0) {
    throw Error(ErrorKind::Config, "quadratic form must be a square 2d x 2d matrix");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(a_);
  positive_definite_ = es.eigenvalues().minCoeff() > 0.0;
}

QuadraticForm QuadraticForm::from_symbol(const ClassicalSymbol& p) {
  auto a = p.quadratic_matrix();
  if (!a) throw Error(ErrorKind::Unsupported, "principal symbol is not a quadratic polynomial");
  return QuadraticForm(*a);
}

QuadraticForm QuadraticForm::oscillator(const std::vector<double>& omegas) {
  const int d = static_cast<int>(omegas.size());
  Mat a = Mat::Zero(2 * d, 2 * d);
  for (int j = 0; j < d; ++j) {
    a(j, j) = omegas[j] * omegas[j];
    a(d + j, d + j) = 1.0;
  }
  return QuadraticForm(a);
}

Mat QuadraticForm::propagator(double t) const {
  const Mat generator = t * symplectic_form(dimension()) * a_;
  return generator.exp();
}

FlowMap flow_exact(const QuadraticForm& q, double t, const PhasePoint& z0) {
  FlowMap fm;
  fm.t = t;
  fm.jacobian = q.propagator(t);
  fm.value = PhasePoint::from_stacked(fm.jacobian * z0.stacked());
  return fm;
}

StepResult implicit_midpoint_step(const HomogeneousComponent& p2, const Vec& z, double h,
                                  const FlowOptions& opts) {
  const int n = static_cast<int>(z.size());
  const Mat omega = symplectic_form(n / 2);
  const Mat id = Mat::Identity(n, n);

  Vec k = h * (omega * p2.grad(z));
  Mat hess;
  bool converged = false;
  double last = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, z.norm());
  for (int it = 0; it < opts.newton_max_iter; ++it) {
    const Vec mid = z + 0.5 * k;
    hess = p2.hessian(mid);
    const Vec residual = k - h * (omega * p2.grad(mid));
    const Mat jf = id - 0.5 * h * omega * hess;
    const Vec delta = jf.partialPivLu().solve(residual);
    k -= delta;
    last = delta.norm();
    if (last <= opts.newton_tol * scale) {
      converged = true;
      break;
    }
    // Finite-difference gradients put a noise floor under the correction.
    if (last >= 0.5 * prev && last <= 1e-9 * scale) {
      converged = true;
      break;
    }
    prev = last;
  }
  if (!converged) {
    std::ostringstream os;
    os << "implicit midpoint Newton did not converge (step " << h << ", |z| " << z.norm()
       << ", last correction " << last << ")";
    throw Error(ErrorKind::StepSize, os.str());
  }
  const Vec mid = z + 0.5 * k;
  hess = p2.hessian(mid);
  const Mat a = 0.5 * h * omega * hess;
  StepResult r;
  r.z = z + k;
  r.jacobian = (id - a).partialPivLu().solve(id + a);
  return r;
}

namespace {

StepResult integrate_fixed(const HomogeneousComponent& p2, const Vec& z0, double t, long steps,
                           const FlowOptions& opts) {
  const int n = static_cast<int>(z0.size());
  StepResult acc{z0, Mat::Identity(n, n)};
  if (t == 0.0 || steps == 0) return acc;
  const double h = t / static_cast<double>(steps);

  std::vector<double> stages;
  if (opts.order == 2) {
    stages = {h};
  } else if (opts.order == 4) {
    const double cbrt2 = std::cbrt(2.0);
    const double g1 = 1.0 / (2.0 - cbrt2);
    const double g2 = -cbrt2 / (2.0 - cbrt2);
    stages = {g1 * h, g2 * h, g1 * h};
  } else {
    throw Error(ErrorKind::Config, "flow integrator order must be 2 or 4");
  }

  for (long s = 0; s < steps; ++s) {
    for (double hs : stages) {
      StepResult st = implicit_midpoint_step(p2, acc.z, hs, opts);
      acc.z = std::move(st.z);
      acc.jacobian = st.jacobian * acc.jacobian;
    }
  }
  return acc;
}

long step_count(double t, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::StepSize, "integration step must be positive");
  return static_cast<long>(std::ceil(std::abs(t) / step - 1e-9));
}

}  // namespace

FlowMap flow_numeric(const ClassicalSymbol& p, double t, const PhasePoint& z0, double step) {
  FlowOptions opts;
  opts.step = step;
  return flow_numeric(p, t, z0, opts);
}

FlowMap flow_numeric(const ClassicalSymbol& p, double t, const PhasePoint& z0,
                     const FlowOptions& opts) {
  const long steps = step_count(t, opts.step);
  StepResult coarse = integrate_fixed(p.p2(), z0.stacked(), t, steps, opts);
  FlowMap fm;
  fm.t = t;
  if (opts.richardson && steps > 0) {
    StepResult fine = integrate_fixed(p.p2(), z0.stacked(), t, 2 * steps, opts);
    fm.error_estimate = (fine.z - coarse.z).norm() / (std::pow(2.0, opts.order) - 1.0);
    coarse = std::move(fine);
  }
  fm.value = PhasePoint::from_stacked(coarse.z);
  fm.jacobian = std::move(coarse.jacobian);
  return fm;
}

FlowMap flow(const ClassicalSymbol& p, double t, const PhasePoint& z0, const FlowOptions& opts) {
  if (auto a = p.quadratic_matrix()) return flow_exact(QuadraticForm(*a), t, z0);
  return flow_numeric(p, t, z0, opts);
}

FlowEvaluator::FlowEvaluator(const ClassicalSymbol& p, const PhasePoint& z0, FlowOptions opts)
    : p_(p), z0_(z0.stacked()), opts_(opts) {
  opts_.richardson = false;
  if (auto a = p.quadratic_matrix()) quadratic_.emplace(*a);
  FlowMap start;
  start.t = 0.0;
  start.value = z0;
  start.jacobian = Mat::Identity(z0_.size(), z0_.size());
  cache_.emplace(0.0, std::move(start));
}

const FlowMap& FlowEvaluator::at(double s) {
  if (auto it = cache_.find(s); it != cache_.end()) return it->second;
  if (quadratic_) {
    return cache_.emplace(s, flow_exact(*quadratic_, s, PhasePoint::from_stacked(z0_)))
        .first->second;
  }
  // Nearest checkpoint, then re-integrate the remaining interval.
  auto hi = cache_.lower_bound(s);
  auto best = hi;
  if (hi == cache_.end() || (hi != cache_.begin() && s - std::prev(hi)->first < hi->first - s)) {
    best = std::prev(hi);
  }
  const FlowMap& base = best->second;
  const double dt = s - best->first;
  StepResult r = integrate_fixed(p_.p2(), base.value.stacked(), dt, step_count(dt, opts_.step),
                                 opts_);
  FlowMap fm;
  fm.t = s;
  fm.value = PhasePoint::from_stacked(r.z);
  fm.jacobian = r.jacobian * base.jacobian;
  return cache_.emplace(s, std::move(fm)).first->second;
}

namespace {

double integrate_along_flow(const std::function<double(double)>& g, double t, double rel_tol) {
  if (t == 0.0) return 0.0;
  const double a = std::min(0.0, t);
  const double b = std::max(0.0, t);
  double err = 0.0;
  double l1 = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, a, b, 20, rel_tol, &err,
                                                                    &l1);
  if (err > rel_tol * l1 && err > 1e-14 * (b - a)) {
    std::ostringstream os;
    os << "flow quadrature did not reach tolerance " << rel_tol << " (estimate " << err
       << ", L1 " << l1 << ")";
    throw Error(ErrorKind::Tolerance, os.str());
  }
  return t < 0.0 ? -v : v;
}

}  // namespace

double xt_integral(const HomogeneousComponent& f, const ClassicalSymbol& p, double t,
                   const PhasePoint& z0, double rel_tol) {
  if (f.is_zero()) return 0.0;
  FlowEvaluator ev(p, z0);
  return integrate_along_flow([&](double s) { return f.eval(ev.at(s).value); }, t, rel_tol);
}

Vec xt_gradient_xi(const HomogeneousComponent& f, const ClassicalSymbol& p, double t,
                   const Vec& xi) {
  const int d = static_cast<int>(xi.size());
  const double xi_norm = xi.norm();
  if (!(xi_norm > 0.0)) {
    throw Error(ErrorKind::EvaluationDomain, "xt_gradient_xi requires xi != 0");
  }
  Vec result = Vec::Zero(d);
  if (t == 0.0 || f.is_zero()) return result;

  const Vec zero = Vec::Zero(d);
  FlowEvaluator ev(p, PhasePoint(zero, xi));
  Vec variational(d);
  for (int j = 0; j < d; ++j) {
    variational[j] = integrate_along_flow(
        [&](double s) {
          const FlowMap& fm = ev.at(s);
          return f.grad(fm.value.stacked()).dot(fm.jacobian.col(d + j));
        },
        t, 1e-12);
  }

  const double h = 1e-5 * xi_norm;
  Vec central(d);
  for (int j = 0; j < d; ++j) {
    Vec xp = xi;
    Vec xm = xi;
    xp[j] += h;
    xm[j] -= h;
    const double fp = xt_integral(f, p, t, PhasePoint(zero, xp), 1e-13);
    const double fm = xt_integral(f, p, t, PhasePoint(zero, xm), 1e-13);
    central[j] = (fp - fm) / (2.0 * h);
  }

  const double scale = std::abs(t) * f.grad(PhasePoint(zero, xi / xi_norm).stacked()).norm();
  const double tol =
      1e-4 * std::max({variational.norm(), central.norm(), 1e-2 * scale, 1e-300});
  if ((variational - central).norm() > tol) {
    std::ostringstream os;
    os << "xt_gradient_xi: variational and finite-difference gradients disagree ("
       << (variational - central).norm() << " > " << tol << ")";
    throw Error(ErrorKind::NumericalConsistency, os.str());
  }
  return variational;
}

}  // namespace wfl
