#pragma once

#include "wavefront_lab/quantum.hpp"
#include "wavefront_lab/wfpredict.hpp"

#include <string>
#include <vector>

namespace wfl {

// |<u, g_{x,xi,h}>| with g the L2-normalised Gaussian of width sqrt(h)
// modulated to frequency xi / h, sampled on a decimated center grid.
struct GaborField {
  double h = 0.0;
  int d = 1;
  std::vector<double> xs;   // center coordinates per axis
  std::vector<double> xis;  // scaled frequencies per axis
  // Index (ix..., ixi...) with x indices slowest: for d = 1, ix * xis.size() + ixi.
  std::vector<double> magnitudes;

  double at(std::size_t ix, std::size_t ixi) const { return magnitudes[ix * xis.size() + ixi]; }
  // Riemann sum of |V|^2 dx dxi / (2 pi h), per dimension.
  double frame_mass() const;
};

struct GaborOptions {
  int x_stride = 0;  // 0: automatic
  int n_xi = 0;      // samples per axis; 0: automatic
};

GaborField gabor_transform(const GridState& state, double h, const GaborOptions& opts = {});

// Ratio frame_mass / ||u||^2 on the oscillator ground state of the same grid.
double calibrate_frame_constant(int d, int n, double L, double h, const GaborOptions& opts = {});

// Throws a scale error when the window is not resolvable on the grid.
void check_scale(const GridState& state, double h);

struct DetectOptions {
  double smoothness_cutoff = 2.0;
  int n_directions = 16;           // d = 2 only
  double margin_widths = 6.0;      // centers kept inside L - margin_widths * sqrt(h_max)
  double suppression_widths = 2.0; // non-maximum suppression radius in sqrt(h_max)
};

struct DetectionResult {
  WavefrontSet rays;
  std::vector<double> decay_exponents;  // magnitude ~ h^exponent, per ray
  double threshold = 1e-3;
  double smoothness_cutoff = 2.0;
  std::vector<double> scales;
  // Largest finest-scale magnitude over the analysed cells, relative to ||u||.
  double peak_score = 0.0;
  std::vector<std::string> warnings;
};

std::vector<double> default_scales();

DetectionResult detect_wf(const GridState& state, const std::vector<double>& scales = default_scales(),
                          double threshold = 1e-3, const DetectOptions& opts = {});

struct IsoDetectOptions {
  int n_directions = 256;
  double smoothness_cutoff = 2.0;
  double threshold = 1e-3;
  // Radii as fractions of the largest radius reachable in each direction.
  std::vector<double> radius_fractions{0.5, 2.0 / 3.0, 1.0};
};

// d = 1 only: unit-width coherent states at radii along each phase-space
// direction (x, xi) = R (cos phi, sin phi).
std::vector<IsoRay> detect_wf_iso(const GridState& state, const IsoDetectOptions& opts = {});

// Angle between a unit iso direction and the hyperplane {x = 0}.
double angle_to_x_zero_plane(const IsoRay& r);

struct ComparisonReport {
  bool pass = true;
  double detected_to_predicted = 0.0;  // directed Hausdorff in (base / L, angle)
  double predicted_to_detected = 0.0;
  double coverage = 0.0;  // fraction of predicted rays matched by a detection
  std::size_t n_detected = 0;
  std::size_t n_predicted = 0;
  std::vector<std::size_t> unmatched;  // detected rays without a prediction
  double base_tol = 0.0;
  double angle_tol = 0.0;
};

ComparisonReport compare_wf(const WavefrontSet& predicted, const DetectionResult& detected,
                            double base_tol, double angle_tol, double L = 1.0);

}  // namespace wfl
