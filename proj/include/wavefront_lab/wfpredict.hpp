#pragma once

#include "wavefront_lab/recurrence.hpp"

#include <string>
#include <vector>

namespace wfl {

struct Ray {
  Vec base;
  Vec dir;  // unit codirection
  double weight = 1.0;
  int family = -1;  // index into WavefrontSet::families when sampled from one
};

// anchor + span * s, s in [-half_width, half_width]^k, all with codirection dir.
struct AffineFamily {
  Vec anchor;
  Mat span;  // orthonormal columns
  Vec dir;
  double half_width = 0.0;

  double distance(const Vec& base) const;
};

enum class BoundKind { Exact, UpperBound, InnerBoundOnly };
const char* to_string(BoundKind b);

struct WavefrontSet {
  std::vector<Ray> rays;
  bool compact_support = true;
  BoundKind bound = BoundKind::Exact;
  std::vector<AffineFamily> families;

  // Lexicographic order, duplicates within (1e-8 base, 1e-8 angle) removed.
  void canonicalize();
  bool empty() const { return rays.empty(); }
};

Ray make_ray(const Vec& base, const Vec& codirection, double weight = 1.0);

struct IsoRay {
  Vec dir;  // unit vector in R^{2d}, stacked (x, xi)
};

struct PredictOptions {
  double match_angle = 1e-4;
  int family_density = 33;
  double family_half_width = 12.0;
  // Orthogonality against the span of the whole sampled cone instead of the
  // tangent space at the matched direction.
  bool whole_cone = false;
  ScanOptions scan;
};

WavefrontSet propagate_free(const WavefrontSet& wf, double t, const ClassicalSymbol& p,
                            const RecurrenceCone& cone, const PredictOptions& opts = {});

WavefrontSet propagate_reduced(const WavefrontSet& wf, double t, const ClassicalSymbol& p);

// Direct displaced-orthogonality solve, checked against the reduced shift
// followed by propagate_free (agreement to 1e-6 on bases).
WavefrontSet propagate_full(const WavefrontSet& wf, double t, const ClassicalSymbol& p,
                            const RecurrenceCone& cone, const PredictOptions& opts = {});

std::vector<IsoRay> propagate_iso(const std::vector<IsoRay>& wf_iso, double t,
                                  const ClassicalSymbol& p);

// d/deta Xi_t(eta) restricted to the columns of tangent, by the variational
// Jacobian; cross-checked against central differences of eta -> xi(t, 0, eta).
Mat xi_derivative(const ClassicalSymbol& p, double t, const Vec& eta, const Mat& tangent,
                  const FlowOptions& opts = {});

}  // namespace wfl
