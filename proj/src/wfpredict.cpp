#include "wavefront_lab/wfpredict.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

namespace wfl {

const char* to_string(BoundKind b) {
  switch (b) {
    case BoundKind::Exact:
      return "exact";
    case BoundKind::UpperBound:
      return "upper bound";
    case BoundKind::InnerBoundOnly:
      return "inner bound only";
  }
  return "?";
}

double AffineFamily::distance(const Vec& base) const {
  const Vec rel = base - anchor;
  Vec s = span.transpose() * rel;
  for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = std::clamp(s[k], -half_width, half_width);
  return (rel - span * s).norm();
}

Ray make_ray(const Vec& base, const Vec& codirection, double weight) {
  const double n = codirection.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::EvaluationDomain, "ray codirection must be nonzero");
  Ray r;
  r.base = base;
  r.dir = codirection / n;
  r.weight = weight;
  return r;
}

namespace {

bool ray_less(const Ray& a, const Ray& b) {
  for (Eigen::Index k = 0; k < a.base.size(); ++k) {
    if (a.base[k] != b.base[k]) return a.base[k] < b.base[k];
  }
  for (Eigen::Index k = 0; k < a.dir.size(); ++k) {
    if (a.dir[k] != b.dir[k]) return a.dir[k] < b.dir[k];
  }
  return false;
}

}  // namespace

void WavefrontSet::canonicalize() {
  std::stable_sort(rays.begin(), rays.end(), ray_less);
  std::vector<Ray> out;
  for (auto& r : rays) {
    bool dup = false;
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (std::abs(it->base[0] - r.base[0]) > 1e-8) break;
      if ((it->base - r.base).norm() <= 1e-8 && angle_between(it->dir, r.dir) <= 1e-8) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(std::move(r));
  }
  rays = std::move(out);
}

Mat xi_derivative(const ClassicalSymbol& p, double t, const Vec& eta, const Mat& tangent,
                  const FlowOptions& opts) {
  FlowOptions o = opts;
  o.richardson = false;
  const int d = static_cast<int>(eta.size());
  const Vec zero = Vec::Zero(d);
  const FlowMap fm = flow(p, t, PhasePoint(zero, eta), o);
  const Mat jxx = fm.jacobian.block(d, d, d, d);
  const Mat variational = jxx * tangent;

  const double h = 1e-5 * eta.norm();
  Mat central(d, tangent.cols());
  for (Eigen::Index j = 0; j < tangent.cols(); ++j) {
    const Vec a = flow(p, t, PhasePoint(zero, eta + h * tangent.col(j)), o).value.xi;
    const Vec b = flow(p, t, PhasePoint(zero, eta - h * tangent.col(j)), o).value.xi;
    central.col(j) = (a - b) / (2.0 * h);
  }
  const double tol =
      1e-4 * std::max({variational.norm(), central.norm(), 1e-2 * fm.jacobian.norm()});
  if ((variational - central).norm() > tol) {
    std::ostringstream os;
    os << "d Xi / d eta: variational and finite-difference derivatives disagree ("
       << (variational - central).norm() << " > " << tol << ")";
    throw Error(ErrorKind::NumericalConsistency, os.str());
  }
  return variational;
}

namespace {

// Geometry attached to one matched cone direction.
struct Match {
  ConeDirection cd;
  Mat tangent;
  Mat a;  // (dXi T)^T, e x d
};

Mat span_of_cone(const RecurrenceCone& cone) {
  Mat m(cone.d, static_cast<Eigen::Index>(cone.directions.size()));
  for (std::size_t i = 0; i < cone.directions.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = cone.directions[i].eta;
  }
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] > 1e-6 * s[0]) ++r;
  }
  return svd.matrixU().leftCols(r);
}

class Matcher {
 public:
  Matcher(const ClassicalSymbol& p, double t, const RecurrenceCone& cone,
          const PredictOptions& opts)
      : p_(p), t_(t), cone_(cone), opts_(opts) {
    if (opts.whole_cone && !cone.empty()) whole_ = span_of_cone(cone);
  }

  const Match* find(const Vec& eta_in) {
    const Vec u = eta_in.normalized();
    const int i = cone_.find(u, opts_.match_angle);
    if (i >= 0) {
      auto it = stored_.find(i);
      if (it == stored_.end()) {
        it = stored_.emplace(i, build(cone_.directions[static_cast<std::size_t>(i)])).first;
      }
      return &it->second;
    }
    if (cone_.empty()) return nullptr;
    // Input codirection between samples: root-find from it.
    auto cd = refine_cone_direction(p_, cone_, u, opts_.scan);
    if (!cd || angle_between(cd->eta, u) > opts_.match_angle) return nullptr;
    extra_.push_back(build(*cd));
    return &extra_.back();
  }

 private:
  Match build(const ConeDirection& cd) const {
    Match m;
    m.cd = cd;
    m.tangent = whole_.size() > 0 ? whole_ : cd.tangent_basis;
    if (m.tangent.size() == 0) {
      throw Error(ErrorKind::Config, "cone direction carries no tangent basis");
    }
    m.a = xi_derivative(p_, t_, cd.eta, m.tangent, opts_.scan.flow).transpose();
    return m;
  }

  const ClassicalSymbol& p_;
  double t_;
  const RecurrenceCone& cone_;
  PredictOptions opts_;
  Mat whole_;
  std::map<int, Match> stored_;
  std::deque<Match> extra_;
};

// Solves A x = rhs; a unique x gives one ray, otherwise the affine family is
// recorded and sampled.
void emit_solutions(const Match& m, const Vec& rhs, const PredictOptions& opts,
                    WavefrontSet& out) {
  const int d = static_cast<int>(m.a.cols());
  Eigen::JacobiSVD<Mat> svd(m.a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double ref = std::max(1.0, s.size() ? s[0] : 0.0);
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] <= 1e-10 * ref) {
      throw Error(ErrorKind::DegenerateRecurrence,
                  "d Xi / d eta restricted to the cone tangent is singular");
    }
  }
  const Vec anchor = svd.solve(rhs);
  const Vec dir = m.cd.xi.normalized();
  const int k = d - static_cast<int>(m.a.rows());
  if (k == 0) {
    out.rays.push_back(make_ray(anchor, dir));
    return;
  }
  AffineFamily fam;
  fam.anchor = anchor;
  fam.span = svd.matrixV().rightCols(k);
  fam.dir = dir;
  fam.half_width = opts.family_half_width;
  const int fid = static_cast<int>(out.families.size());
  out.families.push_back(fam);

  const int n = std::max(2, opts.family_density);
  long total = 1;
  for (int i = 0; i < k; ++i) total *= n;
  for (long idx = 0; idx < total; ++idx) {
    Vec sv(k);
    long rem = idx;
    for (int i = 0; i < k; ++i) {
      sv[i] = -fam.half_width + 2.0 * fam.half_width * static_cast<double>(rem % n) / (n - 1);
      rem /= n;
    }
    Ray r = make_ray(anchor + fam.span * sv, dir);
    r.family = fid;
    out.rays.push_back(std::move(r));
  }
}

WavefrontSet free_solve(const WavefrontSet& wf, double t, const ClassicalSymbol& p,
                        const RecurrenceCone& cone, const PredictOptions& opts,
                        const HomogeneousComponent* p1) {
  if (std::abs(cone.t - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw Error(ErrorKind::Config, "recurrence cone was computed for a different time");
  }
  WavefrontSet out;
  out.compact_support = wf.compact_support;
  out.bound = wf.compact_support ? BoundKind::UpperBound : BoundKind::InnerBoundOnly;
  Matcher matcher(p, t, cone, opts);
  for (const Ray& in : wf.rays) {
    const Match* m = matcher.find(in.dir);
    if (!m) continue;
    Vec y = in.base;
    if (p1) y += xt_gradient_xi(*p1, p, t, m->cd.eta);
    emit_solutions(*m, m->tangent.transpose() * y, opts, out);
  }
  out.canonicalize();
  return out;
}

double one_sided_gap(const WavefrontSet& a, const WavefrontSet& b) {
  double worst = 0.0;
  for (const Ray& r : a.rays) {
    double best = std::numeric_limits<double>::infinity();
    for (const Ray& q : b.rays) {
      if (angle_between(r.dir, q.dir) > 1e-6) continue;
      best = std::min(best, (r.base - q.base).norm());
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

WavefrontSet propagate_free(const WavefrontSet& wf, double t, const ClassicalSymbol& p,
                            const RecurrenceCone& cone, const PredictOptions& opts) {
  return free_solve(wf, t, p, cone, opts, nullptr);
}

WavefrontSet propagate_reduced(const WavefrontSet& wf, double t, const ClassicalSymbol& p) {
  WavefrontSet out;
  out.compact_support = wf.compact_support;
  out.bound = wf.bound;
  out.families = wf.families;
  for (const Ray& r : wf.rays) {
    Ray s = r;
    if (t != 0.0 && p.has_p1()) s.base = r.base + xt_gradient_xi(p.p1(), p, t, r.dir);
    out.rays.push_back(std::move(s));
  }
  for (auto& f : out.families) {
    if (t != 0.0 && p.has_p1()) f.anchor += xt_gradient_xi(p.p1(), p, t, f.dir);
  }
  out.canonicalize();
  return out;
}

WavefrontSet propagate_full(const WavefrontSet& wf, double t, const ClassicalSymbol& p,
                            const RecurrenceCone& cone, const PredictOptions& opts) {
  if (!wf.compact_support) {
    throw Error(ErrorKind::Config, "full propagation requires compactly supported data");
  }
  if (!p.has_p1()) return propagate_free(wf, t, p, cone, opts);

  WavefrontSet direct = free_solve(wf, t, p, cone, opts, &p.p1());
  const WavefrontSet composed = propagate_free(propagate_reduced(wf, t, p), t, p, cone, opts);
  const double gap = std::max(one_sided_gap(direct, composed), one_sided_gap(composed, direct));
  if (direct.rays.size() != composed.rays.size() || gap > 1e-6) {
    std::ostringstream os;
    os << "direct and shift-then-free evaluations disagree (max base gap " << gap << ", "
       << direct.rays.size() << " vs " << composed.rays.size() << " rays)";
    throw Error(ErrorKind::Composition, os.str());
  }
  return direct;
}

std::vector<IsoRay> propagate_iso(const std::vector<IsoRay>& wf_iso, double t,
                                  const ClassicalSymbol& p) {
  std::vector<IsoRay> out;
  out.reserve(wf_iso.size());
  FlowOptions o;
  o.richardson = false;
  for (const IsoRay& r : wf_iso) {
    const Vec z = flow(p, t, PhasePoint::from_stacked(r.dir), o).value.stacked();
    out.push_back(IsoRay{z.normalized()});
  }
  return out;
}

}  // namespace wfl
