#include "wavefront_lab/quantum.hpp"

#include "wavefront_lab/flow.hpp"

#include <cmath>
#include <sstream>

namespace wfl {

namespace {

constexpr cplx kI(0.0, 1.0);

std::size_t total_size(int d, int n) {
  std::size_t s = 1;
  for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(n);
  return s;
}

// Multi-index of a flat position.
void unflatten(std::size_t idx, int d, int n, int* out) {
  for (int a = d - 1; a >= 0; --a) {
    out[a] = static_cast<int>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
  }
}

// S_k = sum_j in_j exp(-i alpha (x0 + k dx)(y0 + j dy)).
class GridDtft {
 public:
  GridDtft(int n_in, double y0, double dy, int n_out, double x0, double dx, double alpha)
      : cz_(n_in, n_out, alpha * dx * dy) {
    pre_.resize(static_cast<std::size_t>(n_in));
    post_.resize(static_cast<std::size_t>(n_out));
    for (int j = 0; j < n_in; ++j) {
      pre_[static_cast<std::size_t>(j)] = std::polar(1.0, -alpha * x0 * (y0 + j * dy));
    }
    for (int k = 0; k < n_out; ++k) {
      post_[static_cast<std::size_t>(k)] = std::polar(1.0, -alpha * k * dx * y0);
    }
  }

  void apply(const cplx* in, cplx* out) const {
    CVec b(pre_.size());
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = in[j] * pre_[j];
    cz_.apply(b.data(), out);
    for (std::size_t k = 0; k < post_.size(); ++k) out[k] *= post_[k];
  }

 private:
  ChirpZ cz_;
  CVec pre_;
  CVec post_;
};

// e^{-itH_omega} on one axis, H_omega = (D^2 + omega^2 x^2) / 2.
class MehlerAxis {
 public:
  MehlerAxis(int n, double L, double omega, double t, const MehlerOptions& opts)
      : n_(n), L_(L), omega_(omega), t_(t) {
    const double th = omega * t;
    c_ = std::cos(th);
    s_ = std::sin(th);
    const double dx = 2.0 * L / n;
    bool position = false;
    switch (opts.form) {
      case MehlerForm::Position:
        if (std::abs(s_) < opts.caustic_guard) caustic("position", th);
        position = true;
        break;
      case MehlerForm::Mixed:
        if (std::abs(c_) < opts.caustic_guard) caustic("mixed", th);
        break;
      case MehlerForm::Automatic: {
        // Position form when its chirps are resolved with a factor-2 margin.
        const bool resolved =
            std::abs(s_) >= opts.caustic_guard &&
            omega * L * (1.0 + std::abs(c_)) / std::abs(s_) <= 0.5 * kPi / dx;
        position = resolved;
        if (!position && std::abs(c_) < opts.caustic_guard) caustic("automatic", th);
        break;
      }
    }
    position_ = position;

    in_chirp_.resize(static_cast<std::size_t>(n));
    out_chirp_.resize(static_cast<std::size_t>(n));
    if (position_) {
      for (int j = 0; j < n; ++j) {
        const double y = -L + j * dx;
        in_chirp_[static_cast<std::size_t>(j)] = std::polar(1.0, omega * y * y * c_ / (2.0 * s_));
        out_chirp_[static_cast<std::size_t>(j)] = in_chirp_[static_cast<std::size_t>(j)];
      }
      dtft_ = std::make_unique<GridDtft>(n, -L, dx, n, -L, dx, omega / s_);
    } else {
      // The synthesis sum is periodic in x with period 2 pi |cos| / d_eta;
      // refine the frequency grid so that period is the full box.
      const double dxi = kPi * std::abs(c_) / L;
      n_eta_ = static_cast<int>(std::ceil(n / std::abs(c_) - 1e-9));
      const double xi0 = -0.5 * n_eta_ * dxi;
      analysis_ = std::make_unique<GridDtft>(n, -L, dx, n_eta_, xi0, dxi, 1.0);
      in_chirp_.resize(static_cast<std::size_t>(n_eta_));
      for (int m = 0; m < n_eta_; ++m) {
        const double eta = xi0 + m * dxi;
        in_chirp_[static_cast<std::size_t>(m)] =
            std::polar(1.0, -s_ * eta * eta / (2.0 * omega * c_));
      }
      for (int k = 0; k < n; ++k) {
        const double x = -L + k * dx;
        out_chirp_[static_cast<std::size_t>(k)] = std::polar(1.0, -s_ * omega * x * x / (2.0 * c_));
      }
      dtft_ = std::make_unique<GridDtft>(n_eta_, xi0, dxi, n, -L, dx, -1.0 / c_);
    }

    // Normalisation and Maslov phase from the ground-state eigenrelation.
    constant_ = 1.0;
    CVec g(static_cast<std::size_t>(n)), rg(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double x = -L + j * dx;
      g[static_cast<std::size_t>(j)] = std::exp(-0.5 * omega * x * x);
    }
    raw(g.data(), rg.data());
    cplx num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
      num += std::norm(g[static_cast<std::size_t>(j)]);
      den += std::conj(g[static_cast<std::size_t>(j)]) * rg[static_cast<std::size_t>(j)];
    }
    constant_ = std::polar(1.0, -0.5 * omega * t) * num / den;
  }

  bool position_form() const { return position_; }

  void apply(cplx* line) const {
    CVec out(static_cast<std::size_t>(n_));
    raw(line, out.data());
    for (int j = 0; j < n_; ++j) line[j] = constant_ * out[static_cast<std::size_t>(j)];
  }

 private:
  [[noreturn]] void caustic(const char* form, double th) const {
    std::ostringstream os;
    os << "Mehler " << form << " form too close to a caustic (omega t = " << th << ")";
    throw Error(ErrorKind::Caustic, os.str());
  }

  void raw(const cplx* in, cplx* out) const {
    CVec a(static_cast<std::size_t>(position_ ? n_ : n_eta_));
    if (position_) {
      for (int j = 0; j < n_; ++j) a[static_cast<std::size_t>(j)] = in[j] * in_chirp_[static_cast<std::size_t>(j)];
    } else {
      analysis_->apply(in, a.data());
      for (int m = 0; m < n_eta_; ++m) a[static_cast<std::size_t>(m)] *= in_chirp_[static_cast<std::size_t>(m)];
    }
    dtft_->apply(a.data(), out);
    for (int k = 0; k < n_; ++k) out[k] *= out_chirp_[static_cast<std::size_t>(k)];
  }

  int n_;
  int n_eta_ = 0;
  double L_;
  double omega_;
  double t_;
  double c_ = 1.0;
  double s_ = 0.0;
  bool position_ = false;
  CVec in_chirp_;
  CVec out_chirp_;
  std::unique_ptr<GridDtft> dtft_;
  std::unique_ptr<GridDtft> analysis_;
  cplx constant_ = 1.0;
};

// Angular frequencies of the FFT ordering on a box of length 2L.
std::vector<double> fft_frequencies(int n, double L) {
  std::vector<double> xi(static_cast<std::size_t>(n));
  const double dxi = kPi / L;
  for (int k = 0; k < n; ++k) xi[static_cast<std::size_t>(k)] = dxi * (k < n / 2 ? k : k - n);
  return xi;
}

void add_boundary_warning(GridState& s, double warn) {
  const double bm = s.boundary_mass();
  if (bm > warn) {
    std::ostringstream os;
    os << "confinement: boundary-shell mass fraction " << bm << " exceeds " << warn;
    s.warnings.push_back(os.str());
  }
}

}  // namespace

GridState::GridState(int d_, int n_, double L_) : d(d_), n(n_), L(L_) {
  if (d < 1 || d > 2) throw Error(ErrorKind::Config, "grid dimension must be 1 or 2");
  if (n < 8 || (n & (n - 1)) != 0) throw Error(ErrorKind::Config, "grid size must be a power of two");
  if (!(L > 0.0)) throw Error(ErrorKind::Config, "box half-width must be positive");
  values.assign(total_size(d, n), cplx(0.0, 0.0));
}

double GridState::norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(s * std::pow(dx(), d));
}

cplx GridState::inner(const GridState& other) const {
  check_compatible(other);
  cplx s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += std::conj(values[i]) * other.values[i];
  return s * std::pow(dx(), d);
}

double GridState::boundary_mass() const {
  double total = 0.0, edge = 0.0;
  int idx[2];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double m = std::norm(values[i]);
    total += m;
    unflatten(i, d, n, idx);
    bool outer = false;
    for (int a = 0; a < d; ++a) outer = outer || std::abs(x(idx[a])) > 0.95 * L;
    if (outer) edge += m;
  }
  return total > 0.0 ? edge / total : 0.0;
}

void GridState::check_compatible(const GridState& other) const {
  if (d != other.d || n != other.n || L != other.L) {
    throw Error(ErrorKind::Config, "grid states live on different grids");
  }
}

double l2_distance(const GridState& a, const GridState& b) {
  a.check_compatible(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - b.values[i]);
  return std::sqrt(s * std::pow(a.dx(), a.d));
}

bool QuadraticHamiltonianSpec::unperturbed() const {
  return (c.size() == 0 || c.isZero(0.0)) && (b.size() == 0 || b.isZero(0.0)) && !fx && !gxi;
}

void QuadraticHamiltonianSpec::validate() const {
  if (omegas.empty() || omegas.size() > 2) throw Error(ErrorKind::Config, "need 1 or 2 frequencies");
  for (double w : omegas) {
    if (!(w > 0.0)) throw Error(ErrorKind::Config, "frequencies must be positive");
  }
  if (c.size() != 0 && c.size() != d()) throw Error(ErrorKind::Config, "c has the wrong length");
  if (b.size() != 0 && b.size() != d()) throw Error(ErrorKind::Config, "b has the wrong length");
}

ClassicalSymbol QuadraticHamiltonianSpec::symbol() const {
  validate();
  const Vec cc = c.size() ? c : Vec::Zero(d());
  const Vec bb = b.size() ? b : Vec::Zero(d());
  return oscillator_symbol(omegas).with_p1(linear_p1(cc, bb));
}

QuadraticHamiltonianSpec QuadraticHamiltonianSpec::oscillator(std::vector<double> omegas) {
  QuadraticHamiltonianSpec s;
  s.omegas = std::move(omegas);
  s.c = Vec::Zero(s.d());
  s.b = Vec::Zero(s.d());
  return s;
}

GridState mehler_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                           const MehlerOptions& opts) {
  spec.validate();
  if (!spec.unperturbed()) {
    throw Error(ErrorKind::Unsupported, "mehler_propagate needs an unperturbed oscillator");
  }
  if (spec.d() != state.d) throw Error(ErrorKind::Config, "spec and state dimensions differ");
  GridState out = state;
  out.warnings.clear();
  out.t = state.t + t;
  if (t == 0.0) return out;
  for (int axis = 0; axis < state.d; ++axis) {
    const MehlerAxis m(state.n, state.L, spec.omegas[static_cast<std::size_t>(axis)], t, opts);
    for_each_line(out.values, state.d, state.n, axis, [&](cplx* line) { m.apply(line); });
  }
  add_boundary_warning(out, 1e-6);
  return out;
}

GridState translate(const GridState& state, const Vec& shift) {
  GridState out = state;
  const auto xi = fft_frequencies(state.n, state.L);
  for (int axis = 0; axis < state.d; ++axis) {
    const double a = shift[axis];
    if (a == 0.0) continue;
    for_each_line(out.values, state.d, state.n, axis, [&](cplx* line) {
      fft(line, state.n, false);
      for (int k = 0; k < state.n; ++k) {
        line[k] *= std::polar(1.0 / state.n, -xi[static_cast<std::size_t>(k)] * a);
      }
      fft(line, state.n, true);
    });
  }
  return out;
}

namespace {

void modulate(GridState& s, const Vec& b, double sign) {
  int idx[2];
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    unflatten(i, s.d, s.n, idx);
    double ph = 0.0;
    for (int a = 0; a < s.d; ++a) ph += b[a] * s.x(idx[a]);
    s.values[i] *= std::polar(1.0, sign * ph);
  }
}

}  // namespace

GridState exact_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                          const MehlerOptions& opts) {
  spec.validate();
  if (spec.fx || spec.gxi) {
    throw Error(ErrorKind::Unsupported, "exact propagation handles linear perturbations only");
  }
  const int d = spec.d();
  const Vec c = spec.c.size() ? spec.c : Vec::Zero(d);
  const Vec b = spec.b.size() ? spec.b : Vec::Zero(d);
  Vec a(d);
  double e0 = 0.0;
  for (int j = 0; j < d; ++j) {
    const double w2 = spec.omegas[static_cast<std::size_t>(j)] * spec.omegas[static_cast<std::size_t>(j)];
    a[j] = c[j] / w2;
    e0 += 0.5 * b[j] * b[j] + 0.5 * c[j] * c[j] / w2;
  }
  // H = W H0 W^{-1} - e0 with W = e^{-ibx} tau_{-a}.
  GridState u = state;
  modulate(u, b, 1.0);
  u = translate(u, a);
  u = mehler_propagate(u, t, QuadraticHamiltonianSpec::oscillator(spec.omegas), opts);
  u = translate(u, -a);
  modulate(u, b, -1.0);
  const cplx ph = std::polar(1.0, t * e0);
  for (auto& v : u.values) v *= ph;
  u.t = state.t + t;
  u.warnings.clear();
  add_boundary_warning(u, 1e-6);
  return u;
}

GridState splitstep_propagate(const GridState& state, double t, const QuadraticHamiltonianSpec& spec,
                              double dt, const SplitStepOptions& opts) {
  spec.validate();
  if (!(dt > 0.0)) throw Error(ErrorKind::StepSize, "split-step dt must be positive");
  if (spec.d() != state.d) throw Error(ErrorKind::Config, "spec and state dimensions differ");
  const int d = state.d;
  const int n = state.n;
  const Vec c = spec.c.size() ? spec.c : Vec::Zero(d);
  const Vec b = spec.b.size() ? spec.b : Vec::Zero(d);

  const long steps = std::max(1L, static_cast<long>(std::ceil(std::abs(t) / dt - 1e-9)));
  const double h = t / static_cast<double>(steps);

  const std::size_t total = total_size(d, n);
  CVec half_v(total), kin(total);
  const auto freqs = fft_frequencies(n, state.L);
  int idx[2];
  Vec xv(d), kv(d);
  for (std::size_t i = 0; i < total; ++i) {
    unflatten(i, d, n, idx);
    double v = 0.0, tk = 0.0;
    for (int a = 0; a < d; ++a) {
      const double x = state.x(idx[a]);
      const double k = freqs[static_cast<std::size_t>(idx[a])];
      const double w = spec.omegas[static_cast<std::size_t>(a)];
      xv[a] = x;
      kv[a] = k;
      v += 0.5 * w * w * x * x + c[a] * x;
      tk += 0.5 * k * k + b[a] * k;
    }
    if (spec.fx) v += spec.fx(xv);
    if (spec.gxi) tk += spec.gxi(kv);
    half_v[i] = std::polar(1.0, -0.5 * h * v);
    kin[i] = std::polar(1.0, -h * tk);
  }

  GridState out = state;
  out.warnings.clear();
  double worst = out.boundary_mass();
  if (worst > opts.max_boundary) {
    std::ostringstream os;
    os << "confinement: initial boundary-shell mass fraction " << worst << " exceeds "
       << opts.max_boundary;
    throw Error(ErrorKind::Confinement, os.str());
  }
  for (long s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < total; ++i) out.values[i] *= half_v[i];
    fft_nd(out.values, d, n, false);
    for (std::size_t i = 0; i < total; ++i) out.values[i] *= kin[i];
    fft_nd(out.values, d, n, true);
    for (std::size_t i = 0; i < total; ++i) out.values[i] *= half_v[i];
    if ((s + 1) % opts.check_every == 0 || s + 1 == steps) {
      const double bm = out.boundary_mass();
      worst = std::max(worst, bm);
      if (bm > opts.max_boundary) {
        std::ostringstream os;
        os << "confinement: boundary-shell mass fraction " << bm << " at t = "
           << state.t + h * static_cast<double>(s + 1) << " exceeds " << opts.max_boundary;
        throw Error(ErrorKind::Confinement, os.str());
      }
    }
  }
  out.t = state.t + t;
  if (worst > opts.warn_boundary) {
    std::ostringstream os;
    os << "confinement: boundary-shell mass fraction reached " << worst;
    out.warnings.push_back(os.str());
  }
  return out;
}

GridState apply_recurrence_identity(const GridState& state, int k, RecurrenceOp which, int axis) {
  if (axis < 0 || axis >= state.d) throw Error(ErrorKind::Config, "axis out of range");
  GridState out = state;
  const int n = state.n;
  auto reflect = [n](cplx* line) {
    CVec tmp(line, line + n);
    for (int j = 0; j < n; ++j) line[j] = tmp[static_cast<std::size_t>((n - j) % n)];
  };
  if (which == RecurrenceOp::Reflection) {
    const int k4 = ((k % 4) + 4) % 4;
    const cplx phase = std::pow(-kI, k4);
    for_each_line(out.values, state.d, n, axis, [&](cplx* line) {
      if (k4 % 2) reflect(line);
    });
    for (auto& v : out.values) v *= phase;
    return out;
  }
  const int k8 = ((k % 8) + 8) % 8;
  const int fourier = k8 % 2;
  const bool refl = (k8 / 2) % 2 == 1;
  const double dx = state.dx();
  const GridDtft f(n, -state.L, dx, n, -state.L, dx, 1.0);
  const double scale = dx / std::sqrt(2.0 * kPi);
  for_each_line(out.values, state.d, n, axis, [&](cplx* line) {
    if (fourier) {
      CVec tmp(line, line + n);
      f.apply(tmp.data(), line);
      for (int j = 0; j < n; ++j) line[j] *= scale;
    }
    if (refl) reflect(line);
  });
  const cplx phase = std::polar(1.0, -kPi * k8 / 4.0);
  for (auto& v : out.values) v *= phase;
  return out;
}

GridState multiply_x(const GridState& state, int axis) {
  GridState out = state;
  int idx[2];
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    unflatten(i, state.d, state.n, idx);
    out.values[i] *= state.x(idx[axis]);
  }
  return out;
}

GridState multiply_xi(const GridState& state, int axis) {
  GridState out = state;
  const auto xi = fft_frequencies(state.n, state.L);
  for_each_line(out.values, state.d, state.n, axis, [&](cplx* line) {
    fft(line, state.n, false);
    for (int k = 0; k < state.n; ++k) {
      const double f = (k == state.n / 2) ? 0.0 : xi[static_cast<std::size_t>(k)];
      line[k] *= f / state.n;
    }
    fft(line, state.n, true);
  });
  return out;
}

double egorov_check(const EgorovSymbol& a, double t, const QuadraticHamiltonianSpec& spec,
                    const std::vector<GridState>& states) {
  spec.validate();
  if (!spec.unperturbed()) throw Error(ErrorKind::Unsupported, "Egorov check needs p1 = 0");
  const int d = spec.d();
  Vec coeff(2 * d);
  coeff.head(d) = a.c.size() ? a.c : Vec::Zero(d);
  coeff.tail(d) = a.b.size() ? a.b : Vec::Zero(d);
  // (a o exp(tH0))(z) = coeff . (Phi z) = (Phi^T coeff) . z
  const Mat phi = QuadraticForm::oscillator(spec.omegas).propagator(t);
  const Vec moved = phi.transpose() * coeff;

  auto apply_symbol = [d](const Vec& cf, const GridState& u) {
    GridState r = u;
    for (auto& v : r.values) v = 0.0;
    for (int j = 0; j < d; ++j) {
      if (cf[j] != 0.0) {
        const GridState m = multiply_x(u, j);
        for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] += cf[j] * m.values[i];
      }
      if (cf[d + j] != 0.0) {
        const GridState m = multiply_xi(u, j);
        for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] += cf[d + j] * m.values[i];
      }
    }
    return r;
  };

  double worst = 0.0;
  for (const GridState& psi : states) {
    const GridState fwd = mehler_propagate(psi, t, spec);
    const GridState lhs = mehler_propagate(apply_symbol(coeff, fwd), -t, spec);
    const GridState rhs = apply_symbol(moved, psi);
    worst = std::max(worst, l2_distance(lhs, rhs) / psi.norm());
  }
  return worst;
}

namespace {

double hermite_fn(int order, double x) {
  double h0 = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (order == 0) return h0;
  double h1 = std::sqrt(2.0) * x * h0;
  for (int k = 2; k <= order; ++k) {
    const double h2 = std::sqrt(2.0 / k) * x * h1 - std::sqrt((k - 1.0) / k) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

template <class F>
GridState fill(int d, int n, double L, F&& f) {
  GridState s(d, n, L);
  int idx[2];
  Vec x(d);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    unflatten(i, d, n, idx);
    for (int a = 0; a < d; ++a) x[a] = s.x(idx[a]);
    s.values[i] = f(x);
  }
  return s;
}

void normalize(GridState& s) {
  const double nrm = s.norm();
  if (nrm > 0.0) {
    for (auto& v : s.values) v /= nrm;
  }
}

}  // namespace

double smooth_cutoff(double s, double inner, double outer) {
  s = std::abs(s);
  if (s <= inner) return 1.0;
  if (s >= outer) return 0.0;
  auto f = [](double r) { return r > 0.0 ? std::exp(-1.0 / r) : 0.0; };
  const double tau = (outer - s) / (outer - inner);
  return f(tau) / (f(tau) + f(1.0 - tau));
}

GridState hermite_state(int d, int n, double L, const std::vector<int>& orders,
                        const std::vector<double>& omegas) {
  if (static_cast<int>(orders.size()) != d) throw Error(ErrorKind::Config, "one order per axis");
  return fill(d, n, L, [&](const Vec& x) {
    double v = 1.0;
    for (int a = 0; a < d; ++a) {
      const double w = omegas.empty() ? 1.0 : omegas[static_cast<std::size_t>(a)];
      v *= std::pow(w, 0.25) * hermite_fn(orders[static_cast<std::size_t>(a)], std::sqrt(w) * x[a]);
    }
    return cplx(v, 0.0);
  });
}

GridState gaussian_state(int d, int n, double L, const Vec& center, double width,
                         const Vec& momentum) {
  GridState s = fill(d, n, L, [&](const Vec& x) {
    return std::polar(std::exp(-(x - center).squaredNorm() / (2.0 * width * width)),
                      momentum.dot(x));
  });
  normalize(s);
  return s;
}

GridState jump_state(int d, int n, double L, const JumpParams& p) {
  GridState s = fill(d, n, L, [&](const Vec& x) {
    if (!(x[0] > p.x0)) return cplx(0.0, 0.0);
    Vec c = Vec::Zero(d);
    c[0] = p.envelope_center;
    const double env = std::exp(-(x - c).squaredNorm() / (2.0 * p.envelope_width * p.envelope_width));
    return cplx(env * smooth_cutoff(x.norm(), p.cutoff_inner, p.cutoff_outer), 0.0);
  });
  normalize(s);
  return s;
}

GridState box_state(int n, double L, double half_width) {
  GridState s = fill(1, n, L, [&](const Vec& x) {
    return cplx(std::abs(x[0]) <= half_width ? 1.0 : 0.0, 0.0);
  });
  normalize(s);
  return s;
}

}  // namespace wfl
