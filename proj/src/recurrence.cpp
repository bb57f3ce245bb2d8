#include "wavefront_lab/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>
#include <sstream>

namespace wfl {

int RecurrenceCone::find(const Vec& eta, double max_angle) const {
  int best = -1;
  double best_angle = max_angle;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const double a = angle_between(directions[i].eta, eta);
    if (a <= best_angle) {
      best_angle = a;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

// Time-t flow restricted to the fibre over x = 0.
class FibreFlow {
 public:
  FibreFlow(const ClassicalSymbol& p, double t, FlowOptions opts) : p_(p), t_(t), opts_(opts) {
    opts_.richardson = false;
    if (auto a = p.quadratic_matrix()) propagator_ = QuadraticForm(*a).propagator(t);
  }

  FlowMap at(const Vec& eta) const {
    const int d = static_cast<int>(eta.size());
    const PhasePoint z0(Vec::Zero(d), eta);
    if (propagator_) {
      FlowMap fm;
      fm.t = t_;
      fm.jacobian = *propagator_;
      fm.value = PhasePoint::from_stacked(*propagator_ * z0.stacked());
      return fm;
    }
    return flow_numeric(p_, t_, z0, opts_);
  }

 private:
  const ClassicalSymbol& p_;
  double t_;
  FlowOptions opts_;
  std::optional<Mat> propagator_;
};

struct Root {
  Vec eta;
  Vec xi;
  double residual = 0.0;
  bool converged = false;
};

// Tangent-plane Gauss-Newton on |x(t, 0, eta)| over the unit sphere, with
// backtracking. Keeps polishing past tol while it still improves.
Root refine_root(const FibreFlow& f, Vec eta, double tol, int max_iter) {
  const int d = static_cast<int>(eta.size());
  eta.normalize();
  FlowMap fm = f.at(eta);
  double res = fm.value.x.norm();
  for (int it = 0; it < max_iter && res > 1e-3 * tol; ++it) {
    const Mat b = fm.jacobian.block(0, d, d, d);
    const Mat proj = Mat::Identity(d, d) - eta * eta.transpose();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(b * proj);
    cod.setThreshold(1e-12);
    Vec delta = -cod.solve(fm.value.x);
    delta = proj * delta;
    if (delta.norm() > 1.0) delta /= delta.norm();
    if (!(delta.norm() > 1e-16)) break;

    bool improved = false;
    double step = 1.0;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      const Vec cand = (eta + step * delta).normalized();
      FlowMap fc = f.at(cand);
      const double rc = fc.value.x.norm();
      if (rc < res) {
        eta = cand;
        fm = std::move(fc);
        res = rc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return Root{eta, fm.value.xi, res, res <= tol};
}

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return true;
    if (a[k] > b[k]) return false;
  }
  return false;
}

// Rank classification with the ill-conditioned band.
int numerical_rank(const Vec& sv, double reference, bool strict) {
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    const double rel = sv[k] / reference;
    if (rel > 1e-4) {
      ++rank;
    } else if (rel >= 1e-8) {
      if (strict) {
        std::ostringstream os;
        os << "excess: singular value " << sv[k] << " lies in the ambiguous band relative to |J| = "
           << reference;
        throw Error(ErrorKind::IllConditionedExcess, os.str());
      }
      if (rel > 1e-6) ++rank;
    }
  }
  return rank;
}

ExcessDetail excess_from_jacobian(const Mat& jacobian, const Mat& backward) {
  const int d = static_cast<int>(jacobian.rows() / 2);
  ExcessDetail out;
  Eigen::JacobiSVD<Mat> full(jacobian);
  out.reference = full.singularValues()[0];
  Eigen::JacobiSVD<Mat> blk(jacobian.block(0, d, d, d));
  out.singular_values = blk.singularValues();
  out.e = d - numerical_rank(out.singular_values, out.reference, true);

  Eigen::JacobiSVD<Mat> bfull(backward);
  Eigen::JacobiSVD<Mat> bblk(backward.block(0, d, d, d));
  const int e_back = d - numerical_rank(bblk.singularValues(), bfull.singularValues()[0], false);
  out.backward_consistent = e_back == out.e;
  return out;
}

}  // namespace

ExcessDetail excess_detail(const ClassicalSymbol& p, double t, const Vec& eta,
                           const FlowOptions& opts) {
  FlowOptions o = opts;
  o.richardson = false;
  const int d = static_cast<int>(eta.size());
  const FlowMap fwd = flow(p, t, PhasePoint(Vec::Zero(d), eta.normalized()), o);
  const FlowMap bwd = flow(p, -t, PhasePoint(Vec::Zero(d), fwd.value.xi), o);
  return excess_from_jacobian(fwd.jacobian, bwd.jacobian);
}

int excess(const ClassicalSymbol& p, double t, const Vec& eta, const FlowOptions& opts) {
  return excess_detail(p, t, eta, opts).e;
}

Mat fit_tangent_basis(const ClassicalSymbol& p, double t, const Vec& eta,
                      const std::vector<Vec>& neighbours, int expected_dim,
                      const ScanOptions& opts) {
  const int d = static_cast<int>(eta.size());
  const Vec u = eta.normalized();
  std::vector<Vec> rows;

  if (d > 1) {
    const Mat um = u;
    Eigen::HouseholderQR<Mat> qr(um);
    const Mat q = qr.householderQ();
    const Mat frame = q.rightCols(d - 1);
    const FibreFlow f(p, t, opts.flow);
    const double eps = 1e-3;
    for (int j = 0; j < d - 1; ++j) {
      for (double s : {-1.0, 1.0}) {
        const Root r = refine_root(f, u + s * eps * frame.col(j), opts.tol, opts.max_iter);
        if (!r.converged) continue;
        const Vec off = r.eta - r.eta.dot(u) * u;
        if (off.norm() > 0.1 * eps) rows.push_back(off.normalized());
      }
    }
    for (const Vec& v : neighbours) {
      const Vec w = v.normalized();
      if (angle_between(w, u) > 0.1) continue;
      const Vec off = w - w.dot(u) * u;
      if (off.norm() > 1e-6) rows.push_back(off.normalized());
    }
  }

  int k = 0;
  Mat extra;
  if (!rows.empty()) {
    Mat r(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) r.row(static_cast<Eigen::Index>(i)) = rows[i];
    Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] * s[i] > 0.05 * static_cast<double>(rows.size())) ++k;
    }
    extra = svd.matrixV().leftCols(k);
  }

  if (k + 1 != expected_dim) {
    std::ostringstream os;
    os << "tangent fit at eta has dimension " << k + 1 << " but the excess is " << expected_dim;
    throw Error(ErrorKind::CleanIntersection, os.str());
  }
  Mat basis(d, k + 1);
  basis.col(0) = u;
  for (int i = 0; i < k; ++i) {
    Vec v = extra.col(i);
    for (int j = 0; j <= i; ++j) v -= v.dot(basis.col(j)) * basis.col(j);
    basis.col(i + 1) = v.normalized();
  }
  return basis;
}

RecurrenceCone gamma_scan(const ClassicalSymbol& p, double t, int n_samples, double tol,
                          const ScanOptions& opts) {
  const int d = p.dimension();
  if (n_samples < 8 * d) {
    throw Error(ErrorKind::Config, "gamma_scan needs at least 8 d sample directions");
  }
  const FibreFlow f(p, t, opts.flow);
  const std::vector<Vec> seeds = sphere_sample(d, n_samples, opts.seed);

  std::vector<Root> roots(seeds.size());
  parallel_for(seeds.size(), opts.jobs,
               [&](std::size_t i) { roots[i] = refine_root(f, seeds[i], tol, opts.max_iter); });

  std::vector<Root> kept;
  for (auto& r : roots) {
    if (r.converged) kept.push_back(std::move(r));
  }
  std::sort(kept.begin(), kept.end(),
            [](const Root& a, const Root& b) { return lex_less(a.eta, b.eta); });
  std::vector<Root> unique;
  for (auto& r : kept) {
    bool dup = false;
    for (auto& u : unique) {
      if (angle_between(u.eta, r.eta) <= opts.dedup_angle) {
        if (r.residual < u.residual) u = r;
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(std::move(r));
  }

  RecurrenceCone cone;
  cone.t = t;
  cone.tol = tol;
  cone.d = d;
  cone.directions.resize(unique.size());
  std::vector<Vec> etas;
  for (const auto& r : unique) etas.push_back(r.eta);

  std::vector<std::string> warn(unique.size());
  parallel_for(unique.size(), opts.jobs, [&](std::size_t i) {
    ConeDirection& cd = cone.directions[i];
    cd.eta = unique[i].eta;
    cd.xi = unique[i].xi;
    cd.residual = unique[i].residual;
    const ExcessDetail ed = excess_detail(p, t, cd.eta, opts.flow);
    cd.excess = ed.e;
    if (!ed.backward_consistent) {
      warn[i] = "backward-flow rank differs from forward rank; intersection may not be clean";
    }
    if (opts.tangents) {
      cd.tangent_basis = fit_tangent_basis(p, t, cd.eta, etas, cd.excess, opts);
    }
  });
  for (auto& w : warn) {
    if (!w.empty()) cone.warnings.push_back(std::move(w));
  }
  return cone;
}

RecurrenceCone gamma_scan(const ClassicalSymbol& p, double t, int n_samples,
                          const ScanOptions& opts) {
  return gamma_scan(p, t, n_samples, opts.tol, opts);
}

std::optional<ConeDirection> refine_cone_direction(const ClassicalSymbol& p,
                                                   const RecurrenceCone& cone, const Vec& eta,
                                                   const ScanOptions& opts) {
  const FibreFlow f(p, cone.t, opts.flow);
  const Root r = refine_root(f, eta, cone.tol, opts.max_iter);
  if (!r.converged) return std::nullopt;
  ConeDirection cd;
  cd.eta = r.eta;
  cd.xi = r.xi;
  cd.residual = r.residual;
  cd.excess = excess_detail(p, cone.t, cd.eta, opts.flow).e;
  std::vector<Vec> etas;
  for (const auto& c : cone.directions) etas.push_back(c.eta);
  cd.tangent_basis = fit_tangent_basis(p, cone.t, cd.eta, etas, cd.excess, opts);
  return cd;
}

Mat tangent_cone(const RecurrenceCone& cone, const Vec& eta) {
  const int i = cone.find(eta.normalized(), 1e-6);
  if (i < 0) throw Error(ErrorKind::Config, "tangent_cone: eta is not a stored cone direction");
  const Mat& b = cone.directions[static_cast<std::size_t>(i)].tangent_basis;
  if (b.size() == 0) throw Error(ErrorKind::Config, "tangent_cone: cone was scanned without tangents");
  return b;
}

namespace {

int default_samples(int d) { return d == 1 ? 8 : std::max(64, 32 * d * d); }

// min over the unit sphere of |x(t, 0, eta)|.
class ResidualProfile {
 public:
  ResidualProfile(const ClassicalSymbol& p, const ScanOptions& opts, int n_samples)
      : p_(p), opts_(opts) {
    if (auto a = p.quadratic_matrix()) {
      quadratic_.emplace(*a);
    } else {
      seeds_ = sphere_sample(p.dimension(), n_samples, opts.seed);
      FlowOptions fo = opts.flow;
      fo.richardson = false;
      for (const Vec& s : seeds_) {
        evaluators_.emplace_back(p, PhasePoint(Vec::Zero(p.dimension()), s), fo);
      }
    }
  }

  // Cheap value on the sampling grid.
  double coarse(double t) {
    if (quadratic_) return exact(t);
    double m = std::numeric_limits<double>::infinity();
    for (auto& ev : evaluators_) m = std::min(m, ev.at(t).value.x.norm());
    return m;
  }

  // Refined value used for minimisation and acceptance.
  double fine(double t) {
    if (quadratic_) return exact(t);
    const FibreFlow f(p_, t, opts_.flow);
    double best = std::numeric_limits<double>::infinity();
    Vec seed;
    for (std::size_t i = 0; i < evaluators_.size(); ++i) {
      const double m = evaluators_[i].at(t).value.x.norm();
      if (m < best) {
        best = m;
        seed = seeds_[i];
      }
    }
    return std::min(best, refine_root(f, seed, 1e-3 * opts_.tol, opts_.max_iter).residual);
  }

 private:
  double exact(double t) const {
    const int d = quadratic_->dimension();
    const Mat b = quadratic_->propagator(t).block(0, d, d, d);
    Eigen::JacobiSVD<Mat> svd(b);
    return svd.singularValues()[d - 1];
  }

  const ClassicalSymbol& p_;
  ScanOptions opts_;
  std::optional<QuadraticForm> quadratic_;
  std::vector<Vec> seeds_;
  std::vector<FlowEvaluator> evaluators_;
};

template <class F>
double golden_min(F&& f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace

std::vector<RecurrenceTime> recurrence_times(const ClassicalSymbol& p, double t_min,
                                             double t_max, double resolution,
                                             const ScanOptions& opts, int n_samples) {
  if (!(resolution > 0.0)) throw Error(ErrorKind::Config, "resolution must be positive");
  if (!(t_max > t_min)) throw Error(ErrorKind::Config, "empty time interval");
  if (!validate(p, opts.seed).elliptic) {
    throw Error(ErrorKind::Config, "recurrence scan needs an elliptic principal symbol");
  }
  const int d = p.dimension();
  if (n_samples <= 0) n_samples = default_samples(d);
  n_samples = std::max(n_samples, 8 * d);

  ResidualProfile prof(p, opts, n_samples);
  const long n = std::max(2L, static_cast<long>(std::ceil((t_max - t_min) / resolution)));
  const double h = (t_max - t_min) / static_cast<double>(n);
  std::vector<double> grid(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) grid[static_cast<std::size_t>(k)] = prof.coarse(t_min + k * h);

  const double accept = std::max(opts.tol, 1e-8);
  std::vector<RecurrenceTime> out;
  for (long k = 1; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (!(grid[i] <= grid[i - 1] && grid[i] < grid[i + 1])) continue;
    const double a = t_min + (k - 1) * h;
    const double b = t_min + (k + 1) * h;
    const double ts = golden_min([&](double s) { return prof.fine(s); }, a, b,
                                 1e-13 * std::max(1.0, std::abs(b)));
    if (!(ts > t_min + 1e-9 && ts < t_max - 1e-9)) continue;
    const double m = prof.fine(ts);
    if (m > accept) continue;
    if (!out.empty() && std::abs(out.back().t - ts) < 0.5 * h) continue;
    RecurrenceTime rt;
    rt.t = ts;
    rt.residual = m;
    rt.cone = gamma_scan(p, ts, n_samples, std::max(opts.tol, 10.0 * m), opts);
    out.push_back(std::move(rt));
  }
  return out;
}

}  // namespace wfl
