#pragma once

#include "wavefront_lab/common.hpp"
#include "wavefront_lab/fft.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wfl {

// I(lambda, y) = lambda^d int exp(i lambda^2 phi(x) + i lambda (psi(x, y) - psi(0, y))) a(lambda, x, y) dx
struct StatPhaseProblem {
  std::string name;
  int d = 1;
  int n = 1;
  std::function<double(const Vec&)> phi;
  std::function<double(const Vec&, const Vec&)> psi;
  std::function<cplx(double, const Vec&, const Vec&)> amplitude;
  Vec support;     // half-widths of a box containing supp a
  double m = 0.0;  // growth order of a in lambda
  std::vector<double> lambda_grid;
  std::vector<Vec> y_grid;

  // phi(0) = 0, grad phi(0) = 0 and a nonsingular Hessian at 0.
  void validate() const;
};

struct QuadratureOptions {
  double nodes_per_oscillation = 20.0;
  double rel_tol = 1e-6;
  int panel_order = 16;
  long max_nodes = 1L << 28;  // total over all dimensions
};

struct QuadratureResult {
  cplx value;
  long nodes = 0;  // nodes of the accepted rule
  int doublings = 0;
};

QuadratureResult eval_I_detail(const StatPhaseProblem& prob, double lambda, const Vec& y,
                               const QuadratureOptions& opts = {});
cplx eval_I(const StatPhaseProblem& prob, double lambda, const Vec& y, const QuadratureOptions& opts = {});

// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

struct BoundednessRow {
  std::vector<int> alpha;
  Vec y;
  double lambda = 0.0;
  double magnitude = 0.0;
  double slope = 0.0;  // fitted over the lambda grid for this (alpha, y)
  bool pass = true;
};

struct BoundednessReport {
  std::string problem;
  double m = 0.0;
  std::vector<BoundednessRow> rows;
  bool pass = true;
  double max_slope = -1e300;
  std::vector<std::string> warnings;

  std::string to_csv() const;
};

struct BoundednessOptions {
  int alpha_max = 2;
  double fd_step = 1e-4;
  int jobs = 1;
  QuadratureOptions quad;
};

BoundednessReport verify_boundedness(const StatPhaseProblem& prob, const BoundednessOptions& opts = {});

// Stationary point x(mu, y) of phi + mu (psi(., y) - psi(0, y)) near 0 and the
// fitted orders of |x(mu)| and |Phi_mu(x(mu))| in mu.
struct CriticalPointOrders {
  std::vector<double> mus;
  std::vector<double> x_norms;
  std::vector<double> phase_values;
  double x_order = 0.0;
  double phase_order = 0.0;
};

CriticalPointOrders critical_point_orders(const StatPhaseProblem& prob, const Vec& y,
                                          const std::vector<double>& mus = {1e-1, 1e-2, 1e-3});

// Test-problem library: gaussian, cubic, rotational.
StatPhaseProblem gaussian_problem();
StatPhaseProblem cubic_problem();
StatPhaseProblem rotational_problem();
std::vector<StatPhaseProblem> default_suite();
StatPhaseProblem find_problem(const std::string& name);

// a -> lambda^power a, m -> m + power.
StatPhaseProblem scale_amplitude(const StatPhaseProblem& prob, double power);

}  // namespace wfl
