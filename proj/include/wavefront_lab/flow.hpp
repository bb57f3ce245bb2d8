#pragma once

#include "wavefront_lab/symbols.hpp"

#include <map>
#include <memory>

namespace wfl {

// Time-t value of the Hamiltonian flow of p2 together with its Jacobian
// d exp(tH0) / dz0. Sign convention: x' = d_xi p2, xi' = -d_x p2.
struct FlowMap {
  double t = 0.0;
  PhasePoint value;
  Mat jacobian;
  // Step-doubling estimate of the integration error (0 for closed forms).
  double error_estimate = 0.0;
};

// p2(z) = z^T A z / 2 with A symmetric.
class QuadraticForm {
 public:
  explicit QuadraticForm(const Mat& matrix);
  static QuadraticForm from_symbol(const ClassicalSymbol& p);
  static QuadraticForm oscillator(const std::vector<double>& omegas);

  const Mat& matrix() const { return a_; }
  int dimension() const { return static_cast<int>(a_.rows() / 2); }
  bool positive_definite() const { return positive_definite_; }

  // e^{t Omega A}.
  Mat propagator(double t) const;

 private:
  Mat a_;
  bool positive_definite_ = false;
};

FlowMap flow_exact(const QuadraticForm& q, double t, const PhasePoint& z0);

struct FlowOptions {
  double step = 1e-3;
  // 2: plain implicit midpoint; 4: symmetric triple-jump composition of it.
  int order = 4;
  // Repeat with half the step and report the difference.
  bool richardson = true;
  int newton_max_iter = 50;
  double newton_tol = 1e-14;
};

FlowMap flow_numeric(const ClassicalSymbol& p, double t, const PhasePoint& z0, double step);
FlowMap flow_numeric(const ClassicalSymbol& p, double t, const PhasePoint& z0,
                     const FlowOptions& opts);

// Closed form when p2 is a quadratic polynomial, integrator otherwise.
FlowMap flow(const ClassicalSymbol& p, double t, const PhasePoint& z0,
             const FlowOptions& opts = {});

// Dense evaluation of s -> exp(sH0) z0. Numeric flows are re-integrated from
// the nearest stored checkpoint, so repeated queries reuse earlier work.
class FlowEvaluator {
 public:
  FlowEvaluator(const ClassicalSymbol& p, const PhasePoint& z0, FlowOptions opts = {});

  const FlowMap& at(double s);
  bool is_exact() const { return quadratic_.has_value(); }

 private:
  ClassicalSymbol p_;
  Vec z0_;
  FlowOptions opts_;
  std::optional<QuadraticForm> quadratic_;
  std::map<double, FlowMap> cache_;
};

// X_t f (z0) = integral over [0, t] of f(exp(sH0) z0) ds.
double xt_integral(const HomogeneousComponent& f, const ClassicalSymbol& p, double t,
                   const PhasePoint& z0, double rel_tol = 1e-8);

// d/dxi of X_t f(0, xi), computed by central differences and by the
// variational form; the two are required to agree to 1e-4 relative.
Vec xt_gradient_xi(const HomogeneousComponent& f, const ClassicalSymbol& p, double t,
                   const Vec& xi);

// Fixed-step integrators exposed for oracles and benches.
struct StepResult {
  Vec z;
  Mat jacobian;
};
StepResult implicit_midpoint_step(const HomogeneousComponent& p2, const Vec& z, double h,
                                  const FlowOptions& opts);

}  // namespace wfl
