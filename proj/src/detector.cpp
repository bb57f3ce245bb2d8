#include "wavefront_lab/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace wfl {

namespace {

// FFT of the periodic window (pi h)^{-d/4} exp(-|y|^2 / 2h), times dx^d.
CVec window_spectrum(int d, int n, double L, double h) {
  const double dx = 2.0 * L / n;
  CVec k1(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    const int off = m <= n / 2 ? m : m - n;
    const double y = off * dx;
    k1[static_cast<std::size_t>(m)] = std::pow(kPi * h, -0.25) * std::exp(-0.5 * y * y / h) * dx;
  }
  fft(k1, false);
  if (d == 1) return k1;
  CVec k2(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      k2[static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)] =
          k1[static_cast<std::size_t>(a)] * k1[static_cast<std::size_t>(b)];
    }
  }
  return k2;
}

// |<u, g_{x, theta, h}>| for every grid center x.
std::vector<double> directional_magnitude(const GridState& s, const Vec& theta, double h,
                                          const CVec& spectrum) {
  CVec v = s.values;
  const std::size_t n = static_cast<std::size_t>(s.n);
  for (std::size_t i = 0; i < v.size(); ++i) {
    double ph = 0.0;
    if (s.d == 1) {
      ph = s.x(static_cast<int>(i)) * theta[0];
    } else {
      ph = s.x(static_cast<int>(i / n)) * theta[0] + s.x(static_cast<int>(i % n)) * theta[1];
    }
    v[i] *= std::polar(1.0, -ph / h);
  }
  fft_nd(v, s.d, s.n, false);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= spectrum[i];
  fft_nd(v, s.d, s.n, true);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]);
  return out;
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

double safe_log(double v) { return std::log(std::max(v, 1e-300)); }

// Vertex offset of the parabola through (-1, a), (0, b), (1, c).
double parabola_offset(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -1.0, 1.0);
}

}  // namespace

double GaborField::frame_mass() const {
  if (xs.size() < 2 || xis.size() < 2) return 0.0;
  const double dxc = xs[1] - xs[0];
  const double dxi = xis[1] - xis[0];
  double s = 0.0;
  for (double m : magnitudes) s += m * m;
  return s * std::pow(dxc * dxi / (2.0 * kPi * h), d);
}

void check_scale(const GridState& state, double h) {
  const double w = std::sqrt(h);
  std::ostringstream os;
  if (!(h > 0.0) || w < 4.0 * state.L / state.n) {
    os << "window sqrt(h) = " << w << " below 4L/n";
  } else if (w > state.L / 8.0) {
    os << "window sqrt(h) = " << w << " wider than L/8";
  } else if (1.0 / h > 0.9 * kPi / state.dx()) {
    os << "frequency 1/h = " << 1.0 / h << " beyond the resolvable band";
  } else {
    return;
  }
  throw Error(ErrorKind::Scale, os.str());
}

GaborField gabor_transform(const GridState& state, double h, const GaborOptions& opts) {
  check_scale(state, h);
  const double dx = state.dx();
  const double w = std::sqrt(h);
  int stride = opts.x_stride;
  int n_xi = opts.n_xi;
  double xi_max = 0.0;
  if (state.d == 1) {
    if (stride <= 0) stride = std::max(1, static_cast<int>(std::floor(w / (3.0 * dx))));
    xi_max = 0.8 * h * kPi / dx;
    if (n_xi <= 0) n_xi = 2 * static_cast<int>(std::ceil(xi_max / (w / 3.0))) + 1;
  } else {
    if (stride <= 0) stride = std::max(1, state.n / 64);
    xi_max = 0.5 * h * kPi / dx;
    if (n_xi <= 0) n_xi = 9;
  }
  if (n_xi < 2) throw Error(ErrorKind::Config, "need at least two frequency samples");

  GaborField f;
  f.h = h;
  f.d = state.d;
  for (int j = 0; j < state.n; j += stride) f.xs.push_back(state.x(j));
  for (int k = 0; k < n_xi; ++k) f.xis.push_back(-xi_max + 2.0 * xi_max * k / (n_xi - 1));

  const CVec spec = window_spectrum(state.d, state.n, state.L, h);
  const std::size_t nx = f.xs.size();
  const std::size_t nk = f.xis.size();
  const std::size_t n = static_cast<std::size_t>(state.n);
  const std::size_t cells_x = state.d == 1 ? nx : nx * nx;
  const std::size_t cells_k = state.d == 1 ? nk : nk * nk;
  f.magnitudes.assign(cells_x * cells_k, 0.0);
  f.xis.shrink_to_fit();
  for (std::size_t ck = 0; ck < cells_k; ++ck) {
    Vec theta(state.d);
    if (state.d == 1) {
      theta[0] = f.xis[ck];
    } else {
      theta[0] = f.xis[ck / nk];
      theta[1] = f.xis[ck % nk];
    }
    const auto m = directional_magnitude(state, theta, h, spec);
    for (std::size_t cx = 0; cx < cells_x; ++cx) {
      std::size_t grid = 0;
      if (state.d == 1) {
        grid = cx * static_cast<std::size_t>(stride);
      } else {
        grid = (cx / nx) * static_cast<std::size_t>(stride) * n + (cx % nx) * static_cast<std::size_t>(stride);
      }
      f.magnitudes[cx * cells_k + ck] = m[grid];
    }
  }
  return f;
}

double calibrate_frame_constant(int d, int n, double L, double h, const GaborOptions& opts) {
  std::vector<int> orders(static_cast<std::size_t>(d), 0);
  const GridState g = hermite_state(d, n, L, orders);
  const double nrm = g.norm();
  return gabor_transform(g, h, opts).frame_mass() / (nrm * nrm);
}

std::vector<double> default_scales() { return {0.02, 0.04, 0.08, 0.16}; }

DetectionResult detect_wf(const GridState& state, const std::vector<double>& scales, double threshold,
                          const DetectOptions& opts) {
  DetectionResult res;
  res.threshold = threshold;
  res.smoothness_cutoff = opts.smoothness_cutoff;
  for (double h : scales) {
    try {
      check_scale(state, h);
      res.scales.push_back(h);
    } catch (const Error& e) {
      res.warnings.push_back(std::string("scale dropped: ") + e.what());
    }
  }
  std::sort(res.scales.begin(), res.scales.end());
  if (res.scales.size() < 3 || res.scales.back() < 8.0 * res.scales.front()) {
    throw Error(ErrorKind::InsufficientScales,
                "need at least 3 usable scales spanning a factor of 8");
  }
  const double h_max = res.scales.back();
  const double inner = state.L - opts.margin_widths * std::sqrt(h_max);
  if (inner <= 0.0) throw Error(ErrorKind::Scale, "analysis margin leaves no interior");
  const double nrm = state.norm();
  res.rays.compact_support = true;
  res.rays.bound = BoundKind::Exact;
  if (nrm == 0.0) return res;

  std::vector<Vec> dirs;
  if (state.d == 1) {
    dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
  } else {
    for (int k = 0; k < opts.n_directions; ++k) {
      const double a = 2.0 * kPi * k / opts.n_directions;
      dirs.push_back((Vec(2) << std::cos(a), std::sin(a)).finished());
    }
  }

  const std::size_t n = static_cast<std::size_t>(state.n);
  const std::size_t total = state.values.size();
  std::vector<char> inside(total, 0);
  for (std::size_t i = 0; i < total; ++i) {
    bool ok = true;
    if (state.d == 1) {
      ok = std::abs(state.x(static_cast<int>(i))) <= inner;
    } else {
      ok = std::abs(state.x(static_cast<int>(i / n))) <= inner &&
           std::abs(state.x(static_cast<int>(i % n))) <= inner;
    }
    inside[i] = ok ? 1 : 0;
  }

  std::vector<CVec> spectra;
  for (double h : res.scales) spectra.push_back(window_spectrum(state.d, state.n, state.L, h));
  std::vector<double> log_h;
  for (double h : res.scales) log_h.push_back(std::log(h));

  // mags[dir][scale][cell]
  std::vector<std::vector<std::vector<double>>> mags(dirs.size());
  double field_max = 0.0;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    for (std::size_t s = 0; s < res.scales.size(); ++s) {
      mags[k].push_back(directional_magnitude(state, dirs[k], res.scales[s], spectra[s]));
      for (std::size_t i = 0; i < total; ++i) {
        if (inside[i]) field_max = std::max(field_max, mags[k][s][i]);
      }
    }
    for (std::size_t i = 0; i < total; ++i) {
      if (inside[i]) res.peak_score = std::max(res.peak_score, mags[k][0][i] / nrm);
    }
  }

  struct Candidate {
    std::size_t dir;
    std::size_t cell;
    double score;
    double exponent;
  };
  std::vector<Candidate> cands;
  auto neighbour = [&](std::size_t i, int di, int dj) -> std::ptrdiff_t {
    if (state.d == 1) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + di;
      return (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) ? -1 : j;
    }
    const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(i / n) + di;
    const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(i % n) + dj;
    if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(n) || b >= static_cast<std::ptrdiff_t>(n)) return -1;
    return a * static_cast<std::ptrdiff_t>(n) + b;
  };
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const auto& fine = mags[k][0];
    for (std::size_t i = 0; i < total; ++i) {
      if (!inside[i]) continue;
      double peak = 0.0;
      for (const auto& m : mags[k]) peak = std::max(peak, m[i]);
      if (peak < threshold * field_max) continue;
      bool is_max = true;
      const int rng = state.d == 1 ? 0 : 1;
      for (int di = -1; di <= 1 && is_max; ++di) {
        for (int dj = -rng; dj <= rng && is_max; ++dj) {
          if (di == 0 && dj == 0) continue;
          const auto j = state.d == 1 ? neighbour(i, di, 0) : neighbour(i, di, dj);
          if (j >= 0 && fine[static_cast<std::size_t>(j)] > fine[i]) is_max = false;
        }
      }
      if (!is_max) continue;
      std::vector<double> logs;
      for (const auto& m : mags[k]) logs.push_back(safe_log(m[i]));
      const double exponent = ls_slope(log_h, logs);
      if (exponent >= opts.smoothness_cutoff) continue;
      cands.push_back({k, i, fine[i], exponent});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

  const double radius = opts.suppression_widths * std::sqrt(h_max);
  const double dir_gap = state.d == 1 ? 0.0 : 1.5 * 2.0 * kPi / opts.n_directions;
  std::vector<Candidate> kept;
  std::vector<Vec> kept_bases;
  for (const auto& c : cands) {
    Vec base(state.d);
    const auto& fine = mags[c.dir][0];
    auto refine = [&](int di, int dj) {
      const auto a = neighbour(c.cell, -di, -dj);
      const auto b = neighbour(c.cell, di, dj);
      if (a < 0 || b < 0) return 0.0;
      return parabola_offset(safe_log(fine[static_cast<std::size_t>(a)]), safe_log(fine[c.cell]),
                             safe_log(fine[static_cast<std::size_t>(b)]));
    };
    if (state.d == 1) {
      base[0] = state.x(static_cast<int>(c.cell)) + refine(1, 0) * state.dx();
    } else {
      base[0] = state.x(static_cast<int>(c.cell / n)) + refine(1, 0) * state.dx();
      base[1] = state.x(static_cast<int>(c.cell % n)) + refine(0, 1) * state.dx();
    }
    bool suppressed = false;
    for (std::size_t q = 0; q < kept.size() && !suppressed; ++q) {
      const double ang = std::acos(std::clamp(dirs[kept[q].dir].dot(dirs[c.dir]), -1.0, 1.0));
      if (ang <= dir_gap + 1e-12 && (kept_bases[q] - base).norm() < radius) suppressed = true;
    }
    if (suppressed) continue;
    kept.push_back(c);
    kept_bases.push_back(base);
    res.rays.rays.push_back(make_ray(base, dirs[c.dir], c.score / nrm));
    res.decay_exponents.push_back(c.exponent);
  }
  return res;
}

std::vector<IsoRay> detect_wf_iso(const GridState& state, const IsoDetectOptions& opts) {
  if (state.d != 1) throw Error(ErrorKind::Unsupported, "isotropic detection is implemented for d = 1");
  if (opts.radius_fractions.size() < 3) {
    throw Error(ErrorKind::InsufficientScales, "need at least 3 radii");
  }
  const double dx = state.dx();
  const double x_reach = state.L - 5.0;
  const double xi_reach = 0.5 * kPi / dx;
  if (x_reach <= 0.0) throw Error(ErrorKind::Scale, "box too small for unit-width windows");
  const double norm_w = std::pow(kPi, -0.25);

  auto coherent = [&](double X, double Xi) {
    const int lo = std::max(0, static_cast<int>(std::floor((X - 9.0 + state.L) / dx)));
    const int hi = std::min(state.n - 1, static_cast<int>(std::ceil((X + 9.0 + state.L) / dx)));
    cplx s = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double y = state.x(j);
      s += state.values[static_cast<std::size_t>(j)] * std::polar(norm_w * std::exp(-0.5 * (y - X) * (y - X)), -Xi * y);
    }
    return std::abs(s) * dx;
  };
  // Root-mean-square over a radial band of +-15 percent.
  auto band = [&](double R, double c, double s) {
    constexpr int kSamples = 16;
    double acc = 0.0;
    for (int q = 0; q < kSamples; ++q) {
      const double r = R * (0.85 + 0.3 * q / (kSamples - 1));
      const double v = coherent(r * c, r * s);
      acc += v * v;
    }
    return std::sqrt(acc / kSamples);
  };

  std::vector<double> fr = opts.radius_fractions;
  std::sort(fr.begin(), fr.end());
  std::vector<double> log_r;
  for (double f : fr) log_r.push_back(std::log(f));
  const int nd = opts.n_directions;
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(nd));
  double vmax = 0.0;
  for (int k = 0; k < nd; ++k) {
    const double phi = 2.0 * kPi * k / nd;
    const double c = std::cos(phi), s = std::sin(phi);
    // Stay inside the box (with band overshoot) and below half the Nyquist rate.
    double rmax = 1e300;
    if (std::abs(c) > 1e-12) rmax = std::min(rmax, x_reach / (1.15 * std::abs(c)));
    if (std::abs(s) > 1e-12) rmax = std::min(rmax, xi_reach / (1.15 * std::abs(s)));
    for (double f : fr) vals[static_cast<std::size_t>(k)].push_back(band(f * rmax, c, s));
    vmax = std::max(vmax, vals[static_cast<std::size_t>(k)][0]);
  }
  std::vector<IsoRay> out;
  if (vmax == 0.0) return out;
  for (int k = 0; k < nd; ++k) {
    const auto& v = vals[static_cast<std::size_t>(k)];
    if (v[0] < opts.threshold * vmax) continue;
    std::vector<double> logs;
    for (double x : v) logs.push_back(safe_log(x));
    const double decay = -ls_slope(log_r, logs);
    if (decay >= opts.smoothness_cutoff) continue;
    const double phi = 2.0 * kPi * k / nd;
    out.push_back({(Vec(2) << std::cos(phi), std::sin(phi)).finished()});
  }
  return out;
}

double angle_to_x_zero_plane(const IsoRay& r) {
  const int d = static_cast<int>(r.dir.size()) / 2;
  const double xs = r.dir.head(d).norm();
  return std::asin(std::clamp(xs / r.dir.norm(), 0.0, 1.0));
}

ComparisonReport compare_wf(const WavefrontSet& predicted, const DetectionResult& detected,
                            double base_tol, double angle_tol, double L) {
  ComparisonReport rep;
  rep.base_tol = base_tol;
  rep.angle_tol = angle_tol;
  rep.n_detected = detected.rays.rays.size();
  rep.n_predicted = predicted.rays.size();

  auto angle = [](const Vec& a, const Vec& b) {
    return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
  };
  // Distance from a detected ray to the predicted set: rays and whole families.
  struct Best {
    double metric = std::numeric_limits<double>::infinity();
    bool within = false;
  };
  auto to_predicted = [&](const Ray& r) {
    Best b;
    auto consider = [&](double base_dist, double ang) {
      b.metric = std::min(b.metric, std::max(base_dist / L, ang));
      if (base_dist <= base_tol && ang <= angle_tol) b.within = true;
    };
    for (const auto& p : predicted.rays) {
      if (p.base.size() != r.base.size()) continue;
      consider((p.base - r.base).norm(), angle(p.dir, r.dir));
    }
    for (const auto& f : predicted.families) {
      if (f.anchor.size() != r.base.size()) continue;
      consider(f.distance(r.base), angle(f.dir, r.dir));
    }
    return b;
  };

  for (std::size_t i = 0; i < detected.rays.rays.size(); ++i) {
    const Best b = to_predicted(detected.rays.rays[i]);
    if (!b.within) rep.unmatched.push_back(i);
    rep.detected_to_predicted = std::max(rep.detected_to_predicted, b.metric);
  }
  std::size_t covered = 0;
  for (const auto& p : predicted.rays) {
    double best = std::numeric_limits<double>::infinity();
    bool hit = false;
    for (const auto& r : detected.rays.rays) {
      if (p.base.size() != r.base.size()) continue;
      const double bd = (p.base - r.base).norm();
      const double ang = angle(p.dir, r.dir);
      best = std::min(best, std::max(bd / L, ang));
      if (bd <= base_tol && ang <= angle_tol) hit = true;
    }
    if (hit) ++covered;
    rep.predicted_to_detected = std::max(rep.predicted_to_detected, best);
  }
  if (rep.n_detected == 0) rep.detected_to_predicted = 0.0;
  rep.coverage = rep.n_predicted ? static_cast<double>(covered) / static_cast<double>(rep.n_predicted) : 1.0;
  rep.pass = rep.unmatched.empty();
  return rep;
}

}  // namespace wfl
