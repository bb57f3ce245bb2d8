#pragma once

#include "wavefront_lab/fft.hpp"
#include "wavefront_lab/symbols.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wfl {

// Values on the grid x_j = -L + j dx, dx = 2L / n, per axis; for d = 2 the
// flat index is i0 * n + i1.
struct GridState {
  int d = 1;
  int n = 0;
  double L = 0.0;
  CVec values;
  double t = 0.0;
  std::vector<std::string> warnings;

  GridState() = default;
  GridState(int d_, int n_, double L_);

  double dx() const { return 2.0 * L / n; }
  double x(int j) const { return -L + j * dx(); }
  std::size_t size() const { return values.size(); }
  double norm() const;  // continuum L2 norm (dx^d weighted)
  cplx inner(const GridState& other) const;
  // Fraction of |u|^2 with some |x_i| > 0.95 L.
  double boundary_mass() const;
  void check_compatible(const GridState& other) const;
};

double l2_distance(const GridState& a, const GridState& b);

struct QuadraticHamiltonianSpec {
  std::vector<double> omegas;
  Vec c;  // coefficient of x in p1
  Vec b;  // coefficient of xi in p1
  // Optional bounded corrections with at most linear growth.
  std::function<double(const Vec&)> fx;
  std::function<double(const Vec&)> gxi;

  int d() const { return static_cast<int>(omegas.size()); }
  bool unperturbed() const;
  void validate() const;
  ClassicalSymbol symbol() const;
  static QuadraticHamiltonianSpec oscillator(std::vector<double> omegas);
};

enum class MehlerForm { Automatic, Position, Mixed };

struct MehlerOptions {
  MehlerForm form = MehlerForm::Automatic;
  double caustic_guard = 1e-3;
};

GridState mehler_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                           const MehlerOptions& opts = {});

// H0 + c.x + b.xi is H0 conjugated by a translation and a modulation up to a
// constant, so it propagates exactly through mehler_propagate.
GridState exact_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                          const MehlerOptions& opts = {});

struct SplitStepOptions {
  double warn_boundary = 1e-6;
  double max_boundary = 1e-3;
  int check_every = 64;
};

GridState splitstep_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                              double dt, const SplitStepOptions& opts = {});

enum class RecurrenceOp { Reflection, Fourier };

// (-iR)^k or (e^{-i pi/4} F)^k on one axis; F is the unitary Fourier
// transform evaluated back on the spatial grid.
GridState apply_recurrence_identity(const GridState& state, int k, RecurrenceOp which,
                                    int axis = 0);

// Multiplication by x_axis, and the Fourier multiplier xi_axis = -i d/dx.
GridState multiply_x(const GridState& state, int axis);
GridState multiply_xi(const GridState& state, int axis);
GridState translate(const GridState& state, const Vec& shift);  // u(x - shift)

struct EgorovSymbol {
  Vec c;  // a(x, xi) = c.x + b.xi
  Vec b;
};

double egorov_check(const EgorovSymbol& a, double t, const QuadraticHamiltonianSpec& spec,
                    const std::vector<GridState>& states);

// Initial data.
GridState hermite_state(int d, int n, double L, const std::vector<int>& orders,
                        const std::vector<double>& omegas = {});
GridState gaussian_state(int d, int n, double L, const Vec& center, double width,
                         const Vec& momentum);

struct JumpParams {
  double x0 = 1.0;
  double envelope_center = 1.0;
  double envelope_width = 1.5;
  double cutoff_inner = 5.0;
  double cutoff_outer = 8.0;
};
// 1_{x > x0} times a Gaussian envelope times a smooth compact cutoff; in
// d = 2 the jump is along axis 0 and the envelope is isotropic.
GridState jump_state(int d, int n, double L, const JumpParams& p);

// Normalised indicator of [-a, a] (d = 1).
GridState box_state(int n, double L, double half_width);

// Smooth step from 1 (|s| <= inner) to 0 (|s| >= outer).
double smooth_cutoff(double s, double inner, double outer);

}  // namespace wfl
