#pragma once

#include "wavefront_lab/flow.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wfl {

struct ConeDirection {
  Vec eta;  // unit codirection in Gamma_t
  Vec xi;   // Xi_t(eta)
  double residual = 0.0;
  int excess = 0;
  // Orthonormal columns spanning T_eta Gamma_t; column 0 is eta.
  Mat tangent_basis;
};

struct RecurrenceCone {
  double t = 0.0;
  double tol = 0.0;
  int d = 0;
  std::vector<ConeDirection> directions;  // sorted lexicographically by eta
  std::vector<std::string> warnings;

  bool empty() const { return directions.empty(); }
  // Index of the stored direction closest to eta if within max_angle, else -1.
  int find(const Vec& eta, double max_angle = 1e-6) const;
};

struct ScanOptions {
  double tol = 1e-9;
  std::uint64_t seed = 0;
  int jobs = 1;
  int max_iter = 60;
  double dedup_angle = 1e-6;
  bool tangents = true;
  FlowOptions flow;
};

// Samples S^{d-1}, runs Gauss-Newton on eta -> x(t, 0, eta) restricted to the
// sphere and keeps the converged roots.
RecurrenceCone gamma_scan(const ClassicalSymbol& p, double t, int n_samples, double tol,
                          const ScanOptions& opts = {});
RecurrenceCone gamma_scan(const ClassicalSymbol& p, double t, int n_samples,
                          const ScanOptions& opts = {});

struct ExcessDetail {
  int e = 0;
  Vec singular_values;  // of the d x d block d_eta x(t, 0, eta)
  double reference = 0.0;  // |J| used for the relative thresholds
  bool backward_consistent = true;
};

// e = d - rank d_eta x(t, 0, eta). Singular values below 1e-8 |J| are zero,
// above 1e-4 |J| nonzero; anything in between is refused.
ExcessDetail excess_detail(const ClassicalSymbol& p, double t, const Vec& eta,
                           const FlowOptions& opts = {});
int excess(const ClassicalSymbol& p, double t, const Vec& eta, const FlowOptions& opts = {});

// Stored tangent basis of the cone at eta (which must be a stored direction).
Mat tangent_cone(const RecurrenceCone& cone, const Vec& eta);

// Fits T_eta Gamma_t from nearby roots: stored neighbours within 0.1 rad and
// fresh roots grown from small tangent perturbations of eta.
Mat fit_tangent_basis(const ClassicalSymbol& p, double t, const Vec& eta,
                      const std::vector<Vec>& neighbours, int expected_dim,
                      const ScanOptions& opts = {});

// Refines eta onto Gamma_t and fills excess and tangent data; empty when
// Gauss-Newton does not reach tol. Stored cone directions serve as neighbours.
std::optional<ConeDirection> refine_cone_direction(const ClassicalSymbol& p,
                                                   const RecurrenceCone& cone, const Vec& eta,
                                                   const ScanOptions& opts = {});

struct RecurrenceTime {
  double t = 0.0;
  double residual = 0.0;  // min over the sphere of |x(t, 0, eta)|
  RecurrenceCone cone;
};

// Recurrence times strictly inside (t_min, t_max).
std::vector<RecurrenceTime> recurrence_times(const ClassicalSymbol& p, double t_min,
                                             double t_max, double resolution,
                                             const ScanOptions& opts = {},
                                             int n_samples = 0);

}  // namespace wfl
