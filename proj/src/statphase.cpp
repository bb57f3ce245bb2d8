#include "wavefront_lab/statphase.hpp"

#include "wavefront_lab/quantum.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

namespace wfl {

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 1) throw Error(ErrorKind::Config, "Gauss-Legendre order must be positive");
  Mat jac = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  nodes.resize(static_cast<std::size_t>(order));
  weights.resize(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    const double v = es.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = 2.0 * v * v;
  }
}

namespace {

const std::pair<std::vector<double>, std::vector<double>>& gl_cached(int order) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    std::pair<std::vector<double>, std::vector<double>> nw;
    gauss_legendre(order, nw.first, nw.second);
    it = cache.emplace(order, std::move(nw)).first;
  }
  return it->second;
}

// Per-axis composite rule given panel break points.
struct AxisRule {
  std::vector<double> x;
  std::vector<double> w;
};

AxisRule build_axis(const std::vector<double>& breaks, int order) {
  const auto& [gx, gw] = gl_cached(order);
  AxisRule r;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p], b = breaks[p + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t k = 0; k < gx.size(); ++k) {
      r.x.push_back(mid + half * gx[k]);
      r.w.push_back(half * gw[k]);
    }
  }
  return r;
}

std::vector<double> split_panels(const std::vector<double>& breaks) {
  std::vector<double> out;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    out.push_back(breaks[p]);
    out.push_back(0.5 * (breaks[p] + breaks[p + 1]));
  }
  out.push_back(breaks.back());
  return out;
}

double total_phase(const StatPhaseProblem& p, double lambda, const Vec& x, const Vec& y, double psi0) {
  return lambda * lambda * p.phi(x) + lambda * (p.psi(x, y) - psi0);
}

// Graded panels: each panel holds about panel_order / nodes_per_oscillation
// oscillations of the local phase gradient along that axis.
std::vector<std::vector<double>> initial_breaks(const StatPhaseProblem& p, double lambda, const Vec& y,
                                                const QuadratureOptions& o) {
  const int d = p.d;
  const int samples = d == 1 ? 4097 : 257;
  const double psi0 = p.psi(Vec::Zero(d), y);
  std::vector<std::vector<double>> profile(static_cast<std::size_t>(d),
                                           std::vector<double>(static_cast<std::size_t>(samples), 0.0));
  auto coord = [&](int axis, int s) { return -p.support[axis] + 2.0 * p.support[axis] * s / (samples - 1); };
  const long total = d == 1 ? samples : static_cast<long>(samples) * samples;
  Vec x(d);
  for (long idx = 0; idx < total; ++idx) {
    const int s0 = d == 1 ? static_cast<int>(idx) : static_cast<int>(idx / samples);
    const int s1 = d == 1 ? 0 : static_cast<int>(idx % samples);
    x[0] = coord(0, s0);
    if (d == 2) x[1] = coord(1, s1);
    for (int a = 0; a < d; ++a) {
      const double h = 1e-6 * std::max(1.0, p.support[a]);
      Vec xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double g = std::abs(total_phase(p, lambda, xp, y, psi0) - total_phase(p, lambda, xm, y, psi0)) / (2.0 * h);
      const int s = a == 0 ? s0 : s1;
      auto& slot = profile[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)];
      slot = std::max(slot, g);
    }
  }
  std::vector<std::vector<double>> breaks(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const double R = p.support[a];
    const double ds = 2.0 * R / (samples - 1);
    const auto& prof = profile[static_cast<std::size_t>(a)];
    auto kmax = [&](double lo, double hi) {
      const int i0 = std::max(0, static_cast<int>(std::floor((lo + R) / ds)) - 1);
      const int i1 = std::min(samples - 1, static_cast<int>(std::ceil((hi + R) / ds)) + 1);
      double k = 0.0;
      for (int i = i0; i <= i1; ++i) k = std::max(k, prof[static_cast<std::size_t>(i)]);
      return k;
    };
    const double wmax = 2.0 * R / 4.0;
    auto width_for = [&](double k) {
      const double w = 2.0 * kPi * o.panel_order / (o.nodes_per_oscillation * std::max(k, 1e-300));
      return std::min(w, wmax);
    };
    auto& br = breaks[static_cast<std::size_t>(a)];
    double cur = -R;
    br.push_back(cur);
    while (cur < R) {
      double w = width_for(kmax(cur, cur));
      w = width_for(kmax(cur, cur + w));
      w = std::min(w, R - cur);
      if (R - (cur + w) < 1e-3 * w) w = R - cur;
      cur += w;
      br.push_back(cur >= R ? R : cur);
      if (cur >= R) break;
    }
  }
  return breaks;
}

struct Rule {
  std::vector<AxisRule> axes;
  long nodes() const {
    long n = 1;
    for (const auto& a : axes) n *= static_cast<long>(a.x.size());
    return n;
  }
};

Rule make_rule(const std::vector<std::vector<double>>& breaks, int order) {
  Rule r;
  for (const auto& b : breaks) r.axes.push_back(build_axis(b, order));
  return r;
}

// Returns the integral and the sum of |weight * amplitude| (for an absolute floor).
std::pair<cplx, double> integrate(const StatPhaseProblem& p, double lambda, const Vec& y, const Rule& r) {
  const double psi0 = p.psi(Vec::Zero(p.d), y);
  cplx acc = 0.0;
  double mass = 0.0;
  Vec x(p.d);
  if (p.d == 1) {
    const auto& ax = r.axes[0];
    for (std::size_t i = 0; i < ax.x.size(); ++i) {
      x[0] = ax.x[i];
      const cplx a = p.amplitude(lambda, x, y);
      if (a == cplx(0.0, 0.0)) continue;
      acc += ax.w[i] * a * std::polar(1.0, total_phase(p, lambda, x, y, psi0));
      mass += ax.w[i] * std::abs(a);
    }
  } else {
    const auto& a0 = r.axes[0];
    const auto& a1 = r.axes[1];
    for (std::size_t i = 0; i < a0.x.size(); ++i) {
      x[0] = a0.x[i];
      for (std::size_t j = 0; j < a1.x.size(); ++j) {
        x[1] = a1.x[j];
        const cplx a = p.amplitude(lambda, x, y);
        if (a == cplx(0.0, 0.0)) continue;
        const double w = a0.w[i] * a1.w[j];
        acc += w * a * std::polar(1.0, total_phase(p, lambda, x, y, psi0));
        mass += w * std::abs(a);
      }
    }
  }
  const double scale = std::pow(lambda, p.d);
  return {acc * scale, mass * scale};
}

struct Converged {
  QuadratureResult result;
  Rule rule;
};

Converged converge(const StatPhaseProblem& p, double lambda, const Vec& y, const QuadratureOptions& o) {
  if (!(lambda >= 1.0)) throw Error(ErrorKind::Config, "lambda must be at least 1");
  if (y.size() != p.n) throw Error(ErrorKind::Config, "y has the wrong dimension");
  auto breaks = initial_breaks(p, lambda, y, o);
  Rule coarse = make_rule(breaks, o.panel_order);
  auto prev = integrate(p, lambda, y, coarse);
  int doublings = 0;
  while (true) {
    for (auto& b : breaks) b = split_panels(b);
    Rule fine = make_rule(breaks, o.panel_order);
    if (fine.nodes() > o.max_nodes) {
      std::ostringstream os;
      os << "quadrature did not converge at lambda = " << lambda << ": last rule had " << coarse.nodes()
         << " nodes; next rule needs " << fine.nodes()
         << " nodes (limit " << o.max_nodes << ")";
      throw Error(ErrorKind::Resolution, os.str());
    }
    const auto cur = integrate(p, lambda, y, fine);
    ++doublings;
    const double diff = std::abs(cur.first - prev.first);
    if (diff <= o.rel_tol * std::abs(cur.first) || diff <= 1e-14 * cur.second) {
      Converged c;
      c.result.value = cur.first;
      c.result.nodes = fine.nodes();
      c.result.doublings = doublings;
      // The coarser rule already passed the doubling test; derivative stencils reuse it.
      c.rule = std::move(coarse);
      return c;
    }
    prev = cur;
    coarse = std::move(fine);
  }
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
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::vector<std::vector<int>> multi_indices(int n, int max_order) {
  std::vector<std::vector<int>> out;
  out.push_back(std::vector<int>(static_cast<std::size_t>(n), 0));
  if (max_order >= 1) {
    for (int i = 0; i < n; ++i) {
      std::vector<int> a(static_cast<std::size_t>(n), 0);
      a[static_cast<std::size_t>(i)] = 1;
      out.push_back(a);
    }
  }
  if (max_order >= 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        std::vector<int> a(static_cast<std::size_t>(n), 0);
        a[static_cast<std::size_t>(i)] += 1;
        a[static_cast<std::size_t>(j)] += 1;
        out.push_back(a);
      }
    }
  }
  return out;
}

// Central-difference derivative of order |alpha| <= 2 with step k * unit,
// reading values from `at` (offsets in units).
template <class F>
cplx fd_derivative(const std::vector<int>& alpha, int k, double unit, F&& at) {
  const int n = static_cast<int>(alpha.size());
  std::vector<int> idx;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < alpha[static_cast<std::size_t>(i)]; ++c) idx.push_back(i);
  }
  auto off = [n](std::initializer_list<std::pair<int, int>> parts) {
    std::vector<int> o(static_cast<std::size_t>(n), 0);
    for (auto [axis, v] : parts) o[static_cast<std::size_t>(axis)] += v;
    return o;
  };
  const double h = k * unit;
  if (idx.empty()) return at(off({}));
  if (idx.size() == 1) {
    const int i = idx[0];
    return (at(off({{i, k}})) - at(off({{i, -k}}))) / (2.0 * h);
  }
  const int i = idx[0], j = idx[1];
  if (i == j) return (at(off({{i, k}})) - 2.0 * at(off({})) + at(off({{i, -k}}))) / (h * h);
  return (at(off({{i, k}, {j, k}})) - at(off({{i, k}, {j, -k}})) - at(off({{i, -k}, {j, k}})) +
          at(off({{i, -k}, {j, -k}}))) /
         (4.0 * h * h);
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

}  // namespace

void StatPhaseProblem::validate() const {
  if (d < 1 || d > 2) throw Error(ErrorKind::Config, "stationary-phase dimension must be 1 or 2");
  if (n < 1) throw Error(ErrorKind::Config, "y dimension must be positive");
  if (!phi || !psi || !amplitude) throw Error(ErrorKind::Config, "phi, psi and amplitude are required");
  if (support.size() != d || (support.array() <= 0.0).any()) {
    throw Error(ErrorKind::Config, "support half-widths must be positive, one per dimension");
  }
  const Vec z = Vec::Zero(d);
  if (std::abs(phi(z)) > 1e-12) throw Error(ErrorKind::Config, "phi(0) must vanish");
  const double h = 1e-4;
  Mat hess(d, d);
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e[i] = h;
    const double g = (phi(e) - phi(-e)) / (2.0 * h);
    if (std::abs(g) > 1e-6) throw Error(ErrorKind::Config, "grad phi(0) must vanish");
    for (int j = 0; j < d; ++j) {
      Vec f = Vec::Zero(d);
      f[j] = h;
      hess(i, j) = (phi(e + f) - phi(e - f) - phi(-e + f) + phi(-e - f)) / (4.0 * h * h);
    }
  }
  Eigen::JacobiSVD<Mat> svd(hess);
  if (svd.singularValues().minCoeff() <= 1e-6) {
    throw Error(ErrorKind::Config, "Hessian of phi at 0 is singular");
  }
  for (double l : lambda_grid) {
    if (!(l >= 1.0)) throw Error(ErrorKind::Config, "lambda values must be at least 1");
  }
  for (const auto& y : y_grid) {
    if (y.size() != n) throw Error(ErrorKind::Config, "y grid point has the wrong dimension");
  }
}

QuadratureResult eval_I_detail(const StatPhaseProblem& prob, double lambda, const Vec& y,
                               const QuadratureOptions& opts) {
  return converge(prob, lambda, y, opts).result;
}

cplx eval_I(const StatPhaseProblem& prob, double lambda, const Vec& y, const QuadratureOptions& opts) {
  return eval_I_detail(prob, lambda, y, opts).value;
}

std::string BoundednessReport::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "alpha,y,lambda,|d^alpha I|,fitted_slope,pass\n";
  for (const auto& r : rows) {
    std::vector<double> a(r.alpha.begin(), r.alpha.end());
    std::vector<double> y(r.y.data(), r.y.data() + r.y.size());
    os << join(a) << ',' << join(y) << ',' << r.lambda << ',' << r.magnitude << ',' << r.slope << ','
       << (r.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

BoundednessReport verify_boundedness(const StatPhaseProblem& prob, const BoundednessOptions& opts) {
  prob.validate();
  BoundednessReport rep;
  rep.problem = prob.name;
  rep.m = prob.m;
  if (prob.lambda_grid.size() < 2) throw Error(ErrorKind::Config, "need at least two lambda values");
  const auto [lmin, lmax] = std::minmax_element(prob.lambda_grid.begin(), prob.lambda_grid.end());
  if (*lmax < 10.0 * *lmin) throw Error(ErrorKind::Config, "lambda grid must span at least a decade");
  int amax = opts.alpha_max;
  if (amax > 2) {
    rep.warnings.push_back("alpha_max capped at 2");
    amax = 2;
  }
  const auto alphas = multi_indices(prob.n, std::max(0, amax));
  const std::size_t nl = prob.lambda_grid.size();
  const std::size_t ny = prob.y_grid.size();

  // values[(iy * nl + il)][ialpha]
  std::vector<std::vector<double>> values(nl * ny, std::vector<double>(alphas.size(), 0.0));
  std::vector<std::string> cell_warnings(nl * ny);
  const double unit = 0.5 * opts.fd_step;
  parallel_for(nl * ny, opts.jobs, [&](std::size_t cell) {
    const std::size_t iy = cell / nl, il = cell % nl;
    const double lambda = prob.lambda_grid[il];
    const Vec& y = prob.y_grid[iy];
    const Converged c = converge(prob, lambda, y, opts.quad);
    std::map<std::vector<int>, cplx> memo;
    auto at = [&](const std::vector<int>& off) {
      auto it = memo.find(off);
      if (it != memo.end()) return it->second;
      Vec yy = y;
      for (int i = 0; i < prob.n; ++i) yy[i] += off[static_cast<std::size_t>(i)] * unit;
      const cplx v = integrate(prob, lambda, yy, c.rule).first;
      memo.emplace(off, v);
      return v;
    };
    for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
      const cplx full = fd_derivative(alphas[ia], 2, unit, at);
      const cplx half = fd_derivative(alphas[ia], 1, unit, at);
      values[cell][ia] = std::abs(full);
      const double scale = std::max(std::abs(full), 1e-12 * std::abs(c.result.value));
      if (std::abs(full - half) > 1e-3 * scale && cell_warnings[cell].empty()) {
        std::ostringstream os;
        os << "finite-difference step halving changed a derivative by " << std::abs(full - half) / scale
           << " (relative) at lambda = " << lambda;
        cell_warnings[cell] = os.str();
      }
    }
  });
  for (const auto& w : cell_warnings) {
    if (!w.empty()) rep.warnings.push_back(w);
  }

  std::vector<double> loglam;
  for (double l : prob.lambda_grid) loglam.push_back(std::log(l));
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
      std::vector<double> logs;
      for (std::size_t il = 0; il < nl; ++il) logs.push_back(std::log(std::max(values[iy * nl + il][ia], 1e-300)));
      const double slope = ls_slope(loglam, logs);
      const bool pass = slope <= prob.m + 0.1;
      rep.pass = rep.pass && pass;
      rep.max_slope = std::max(rep.max_slope, slope);
      for (std::size_t il = 0; il < nl; ++il) {
        rep.rows.push_back({alphas[ia], prob.y_grid[iy], prob.lambda_grid[il], values[iy * nl + il][ia], slope, pass});
      }
    }
  }
  return rep;
}

CriticalPointOrders critical_point_orders(const StatPhaseProblem& prob, const Vec& y,
                                          const std::vector<double>& mus) {
  prob.validate();
  const int d = prob.d;
  const Vec z = Vec::Zero(d);
  const double psi0 = prob.psi(z, y);
  auto Phi = [&](double mu, const Vec& x) { return prob.phi(x) + mu * (prob.psi(x, y) - psi0); };
  CriticalPointOrders out;
  out.mus = mus;
  for (double mu : mus) {
    Vec x = z;
    for (int it = 0; it < 60; ++it) {
      Vec g(d);
      Mat H(d, d);
      const double hg = 1e-6, hh = 1e-4;
      for (int i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e[i] = hg;
        g[i] = (Phi(mu, x + e) - Phi(mu, x - e)) / (2.0 * hg);
        Vec ei = Vec::Zero(d);
        ei[i] = hh;
        for (int j = 0; j < d; ++j) {
          Vec ej = Vec::Zero(d);
          ej[j] = hh;
          H(i, j) = (Phi(mu, x + ei + ej) - Phi(mu, x + ei - ej) - Phi(mu, x - ei + ej) + Phi(mu, x - ei - ej)) /
                    (4.0 * hh * hh);
        }
      }
      const Vec step = H.fullPivLu().solve(g);
      x -= step;
      if (step.norm() <= 1e-15 * std::max(1.0, x.norm())) break;
    }
    out.x_norms.push_back(x.norm());
    out.phase_values.push_back(std::abs(Phi(mu, x)));
  }
  auto order = [&](const std::vector<double>& v) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > 0.0) {
        lx.push_back(std::log(mus[i]));
        ly.push_back(std::log(v[i]));
      }
    }
    return lx.size() >= 2 ? ls_slope(lx, ly) : std::numeric_limits<double>::infinity();
  };
  out.x_order = order(out.x_norms);
  out.phase_order = order(out.phase_values);
  return out;
}

namespace {

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> g;
  for (int i = 0; i < count; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return g;
}

}  // namespace

StatPhaseProblem gaussian_problem() {
  StatPhaseProblem p;
  p.name = "gaussian";
  p.d = 1;
  p.n = 1;
  p.phi = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
  p.psi = [](const Vec& x, const Vec& y) { return x[0] * y[0]; };
  p.amplitude = [](double, const Vec& x, const Vec&) { return cplx(smooth_cutoff(x[0], 1.0, 2.0), 0.0); };
  p.support = Vec::Constant(1, 2.0);
  p.lambda_grid = log_grid(10.0, 100.0, 7);
  p.y_grid = {Vec::Constant(1, -0.5), Vec::Constant(1, 0.3), Vec::Constant(1, 1.0)};
  return p;
}

StatPhaseProblem cubic_problem() {
  StatPhaseProblem p;
  p.name = "cubic";
  p.d = 1;
  p.n = 1;
  // phi'' = 1 + 3x/5 stays >= 0.28 on the support [-1.2, 1.2].
  p.phi = [](const Vec& x) { return 0.5 * x[0] * x[0] + x[0] * x[0] * x[0] / 10.0; };
  p.psi = [](const Vec& x, const Vec& y) { return std::sin(x[0]) * y[0]; };
  p.amplitude = [](double, const Vec& x, const Vec&) { return cplx(smooth_cutoff(x[0], 0.8, 1.2), 0.0); };
  p.support = Vec::Constant(1, 1.2);
  p.lambda_grid = log_grid(10.0, 100.0, 7);
  p.y_grid = {Vec::Constant(1, -0.5), Vec::Constant(1, 0.3), Vec::Constant(1, 1.0)};
  return p;
}

StatPhaseProblem rotational_problem() {
  StatPhaseProblem p;
  p.name = "rotational";
  p.d = 2;
  p.n = 2;
  p.phi = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  // psi(x, y) = x . R y with R the rotation by pi/6.
  p.psi = [](const Vec& x, const Vec& y) {
    const double c = std::cos(kPi / 6), s = std::sin(kPi / 6);
    return x[0] * (c * y[0] - s * y[1]) + x[1] * (s * y[0] + c * y[1]);
  };
  p.amplitude = [](double, const Vec& x, const Vec&) { return cplx(smooth_cutoff(x.norm(), 0.2, 0.35), 0.0); };
  p.support = Vec::Constant(2, 0.35);
  p.lambda_grid = log_grid(10.0, 100.0, 5);
  p.y_grid = {(Vec(2) << 0.5, -0.3).finished()};
  return p;
}

std::vector<StatPhaseProblem> default_suite() { return {gaussian_problem(), cubic_problem(), rotational_problem()}; }

StatPhaseProblem find_problem(const std::string& name) {
  for (auto& p : default_suite()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorKind::Config, "unknown stationary-phase problem: " + name);
}

StatPhaseProblem scale_amplitude(const StatPhaseProblem& prob, double power) {
  StatPhaseProblem p = prob;
  auto inner = prob.amplitude;
  p.amplitude = [inner, power](double l, const Vec& x, const Vec& y) { return std::pow(l, power) * inner(l, x, y); };
  p.m = prob.m + power;
  p.name = prob.name + "_scaled";
  return p;
}

}  // namespace wfl
