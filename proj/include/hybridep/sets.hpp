#pragma once

// Convex set descriptions with membership tests, euclidean (metric)
// projection, the generalized projection that minimizes phi(., x), and the
// half-space cuts used by the hybrid schemes.
//
// Projection strategy by space/variant:
//   euclidean          closed forms everywhere; base plus <=2 cuts via active
//                      set case analysis (whole-space base) or a small dual
//                      solve (other bases)
//   p-norm, whole      identity (the unconstrained minimizer of phi(., x) is x)
//   p-norm, halfspace  one scalar dual root find on the multiplier
//   p-norm, box        reduction to a scalar equation in s = |v|_p: for fixed
//                      s the coordinates are clamped closed forms
//   p-norm, ball       multiplier root find, with the inner system solved by
//                      the same norm-scalar reduction plus per-coordinate
//                      monotone solves
//   p-norm, affine     damped Newton on the reduced smooth convex problem
//   p-norm, with cuts  dual bisection/secant over the <=2 cut multipliers,
//                      re-projecting onto the base at each trial point

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridep/core.hpp"
#include "hybridep/geometry.hpp"

namespace hybridep {

// {v : <v, normal> <= offset}. A zero normal represents the whole space when
// offset >= 0 and the empty set otherwise.
struct HalfSpace {
  DualVec normal;
  double offset = 0.0;

  bool zero_normal(double eps = 1e-14) const { return norm2(normal) < eps; }
};

enum class SetKind { whole_space, box, ball, halfspace, affine, with_cuts };

struct ProjectionResult {
  Vec point;
  std::vector<double> multipliers;  // KKT duals for cuts, when applicable
  int inner_iterations = 0;
  double residual = 0.0;
};

class ConvexSet {
public:
  static ConvexSet whole(std::size_t dim) {
    ConvexSet s;
    s.kind_ = SetKind::whole_space;
    s.dim_ = dim;
    return s;
  }

  static ConvexSet box(Vec lower, Vec upper) {
    detail::check_dims(lower, upper, "box");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (lower[i] > upper[i])
        throw ConfigError("box: lower > upper in coordinate " +
                          std::to_string(i));
    ConvexSet s;
    s.kind_ = SetKind::box;
    s.dim_ = lower.size();
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  // Euclidean ball, any center.
  static ConvexSet ball(Vec center, double radius) {
    if (!(radius > 0.0)) throw ConfigError("ball: radius must be positive");
    ConvexSet s;
    s.kind_ = SetKind::ball;
    s.dim_ = center.size();
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static ConvexSet halfspace(HalfSpace h) {
    ConvexSet s;
    s.kind_ = SetKind::halfspace;
    s.dim_ = h.normal.size();
    s.hs_ = std::move(h);
    return s;
  }

  // Linear subspace through the origin spanned by the given vectors (the
  // spanning set is orthonormalized; an empty span is the set {0}).
  static ConvexSet affine_subspace(std::size_t dim, std::vector<Vec> span) {
    for (const Vec& v : span)
      if (v.size() != dim) throw DimensionError("affine_subspace: bad span");
    ConvexSet s;
    s.kind_ = SetKind::affine;
    s.dim_ = dim;
    s.basis_ = orthonormalize(span);
    return s;
  }

  // Base set intersected with up to two half-space cuts. Nesting flattens.
  static ConvexSet with_cuts(ConvexSet base, std::vector<HalfSpace> cuts) {
    if (base.kind_ == SetKind::with_cuts) {
      std::vector<HalfSpace> all = base.cuts_;
      for (auto& c : cuts) all.push_back(std::move(c));
      return with_cuts(*base.base_, std::move(all));
    }
    if (cuts.size() > 2)
      throw ConfigError("with_cuts: at most two cuts are supported");
    for (const auto& c : cuts)
      if (c.normal.size() != base.dim_)
        throw DimensionError("with_cuts: cut dimension mismatch");
    ConvexSet s;
    s.kind_ = SetKind::with_cuts;
    s.dim_ = base.dim_;
    s.base_ = std::make_shared<ConvexSet>(std::move(base));
    s.cuts_ = std::move(cuts);
    return s;
  }

  SetKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const HalfSpace& hs() const { return hs_; }
  const std::vector<Vec>& basis() const { return basis_; }
  const ConvexSet& base() const { return *base_; }
  const std::vector<HalfSpace>& cuts() const { return cuts_; }

private:
  ConvexSet() = default;

  SetKind kind_ = SetKind::whole_space;
  std::size_t dim_ = 0;
  Vec lower_, upper_;
  Vec center_;
  double radius_ = 0.0;
  HalfSpace hs_{DualVec{}, 0.0};
  std::vector<Vec> basis_;
  std::shared_ptr<const ConvexSet> base_;
  std::vector<HalfSpace> cuts_;
};

// ---------------------------------------------------------------------------
// Membership

// Half-space violation normalized by max(1, |a|), so that margins stay
// meaningful as cut normals approach zero.
inline double halfspace_violation(const HalfSpace& h, const Vec& x) {
  double na = norm2(h.normal);
  if (na < 1e-14)
    return h.offset >= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (pairing(x, h.normal) - h.offset) / std::max(1.0, na);
}

// Largest constraint violation of x against the set (<= 0 means member).
inline double violation(const ConvexSet& set, const Vec& x) {
  if (x.size() != set.dim()) throw DimensionError("violation: bad dimension");
  switch (set.kind()) {
    case SetKind::whole_space:
      return 0.0;
    case SetKind::box: {
      double v = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        v = std::max(v, set.lower()[i] - x[i]);
        v = std::max(v, x[i] - set.upper()[i]);
      }
      return v;
    }
    case SetKind::ball:
      return norm2(x - set.center()) - set.radius();
    case SetKind::halfspace:
      return halfspace_violation(set.hs(), x);
    case SetKind::affine: {
      Vec r = x;
      for (const Vec& b : set.basis()) r = r - dot(x, b) * b;
      return norm2(r);
    }
    case SetKind::with_cuts: {
      double v = violation(set.base(), x);
      for (const auto& c : set.cuts())
        v = std::max(v, halfspace_violation(c, x));
      return v;
    }
  }
  return 0.0;
}

inline bool contains(const ConvexSet& set, const Vec& x, double tol = 1e-9) {
  return violation(set, x) <= tol;
}

// ---------------------------------------------------------------------------
// Euclidean (metric) projection

namespace detail {

inline Vec project_halfspace_euclid(const HalfSpace& h, const Vec& x,
                                    double* multiplier = nullptr) {
  double na2 = dot(h.normal, h.normal);
  if (na2 < 1e-28) {
    if (h.offset < 0.0)
      throw InfeasibleError("halfspace with zero normal and negative offset");
    if (multiplier) *multiplier = 0.0;
    return x;
  }
  double gap = pairing(x, h.normal) - h.offset;
  if (gap <= 0.0) {
    if (multiplier) *multiplier = 0.0;
    return x;
  }
  double lam = gap / na2;
  if (multiplier) *multiplier = lam;
  return x - lam * as_primal(h.normal);
}

// Metric projection onto the intersection of <=2 half spaces in euclidean
// geometry: active-set case analysis with a 2x2 gram solve. Throws on an
// empty intersection (antiparallel normals with inconsistent offsets).
inline Vec project_two_cuts_euclid(const std::vector<HalfSpace>& cuts,
                                   const Vec& x, std::vector<double>* lams) {
  if (lams) lams->assign(cuts.size(), 0.0);
  auto feasible = [&](const Vec& v) {
    for (const auto& c : cuts)
      if (halfspace_violation(c, v) > 1e-12 * (1.0 + norm2(v))) return false;
    return true;
  };
  if (feasible(x)) return x;
  if (cuts.size() == 1) {
    double lam;
    Vec v = project_halfspace_euclid(cuts[0], x, &lam);
    if (lams) (*lams)[0] = lam;
    return v;
  }
  // single-cut candidates
  for (int i = 0; i < 2; ++i) {
    double lam;
    Vec v = project_halfspace_euclid(cuts[i], x, &lam);
    if (lam > 0.0 && halfspace_violation(cuts[1 - i], v) <= 1e-12 * (1.0 + norm2(v))) {
      if (lams) (*lams)[i] = lam;
      return v;
    }
  }
  // both cuts active: project onto the intersection of the two boundary
  // hyperplanes. A QR split of [a1 a2] keeps this stable when the normals
  // have very different magnitudes or are nearly parallel; the gram normal
  // equations square the conditioning and misclassify such pairs.
  const DualVec& a1 = cuts[0].normal;
  const DualVec& a2 = cuts[1].normal;
  double n1 = std::sqrt(dot(a1, a1)), n2 = std::sqrt(dot(a2, a2));
  if (n1 < 1e-14 || n2 < 1e-14) {
    // a degenerate cut slipped through: treat it as whole space
    int live = n1 >= 1e-14 ? 0 : 1;
    double lam;
    Vec v = project_halfspace_euclid(cuts[live], x, &lam);
    if (lams) (*lams)[live] = lam;
    return v;
  }
  Vec u1 = (1.0 / n1) * as_primal(a1);
  double r12 = pairing(u1, a2);            // n2 cos(angle)
  Vec w = as_primal(a2) - r12 * u1;
  double r22 = std::sqrt(dot(w, w));       // n2 |sin(angle)|
  if (r22 > 1e-10 * n2) {
    Vec u2 = (1.0 / r22) * w;
    double s1 = pairing(x, a1) - cuts[0].offset;
    double s2 = pairing(x, a2) - cuts[1].offset;
    double step1 = -s1 / n1;
    double step2 = (-s2 - r12 * step1) / r22;
    double l2 = -step2 / r22;
    double l1 = (-step1 - l2 * r12) / n1;
    double lam_tol = 1e-9 * (1.0 + std::fabs(l1) + std::fabs(l2));
    if (l1 >= -lam_tol && l2 >= -lam_tol) {
      if (lams) {
        (*lams)[0] = std::max(l1, 0.0);
        (*lams)[1] = std::max(l2, 0.0);
      }
      return x + step1 * u1 + step2 * u2;
    }
    // mixed multiplier signs with both single-cut candidates rejected can
    // only come from rounding right at a pattern boundary: take the
    // single-cut projection that violates the other cut least
    int best = -1;
    double best_viol = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
      double lam;
      Vec v = project_halfspace_euclid(cuts[i], x, &lam);
      double viol = halfspace_violation(cuts[1 - i], v);
      if (viol < best_viol) {
        best_viol = viol;
        best = i;
      }
    }
    double lam;
    Vec v = project_halfspace_euclid(cuts[best], x, &lam);
    if (lams) (*lams)[best] = lam;
    return v;
  }
  // parallel or antiparallel normals
  double g11 = n1 * n1;
  double cosang = r12 / n2;
  if (cosang < 0.0) {
    // antiparallel: a2 ~ -tau a1 defines a slab alpha_low <= <v,a1> <= alpha1
    double tau = n2 / n1;
    double low = -cuts[1].offset / tau;
    if (low > cuts[0].offset + 1e-12 * (1.0 + std::fabs(low)))
      throw InfeasibleError("two-half-space projection: empty intersection");
    double t = pairing(x, a1);
    double tc = std::min(std::max(t, low), cuts[0].offset);
    double lam = (t - tc) / g11;
    if (lams) {
      if (lam >= 0.0)
        (*lams)[0] = lam;
      else
        (*lams)[1] = -lam * n1 / n2;
      (*lams)[0] = std::max((*lams)[0], 0.0);
      (*lams)[1] = std::max((*lams)[1], 0.0);
    }
    return x - ((t - tc) / g11) * as_primal(a1);
  }
  // parallel same direction: the tighter single cut wins
  int tight = cuts[0].offset / n1 <= cuts[1].offset / n2 ? 0 : 1;
  double lam;
  Vec v = project_halfspace_euclid(cuts[tight], x, &lam);
  if (lams) (*lams)[tight] = lam;
  return v;
}

}  // namespace detail

// Euclidean metric projection P_C(x) = argmin_{v in C} |v - x|_2.
inline Vec metric_project(const ConvexSet& set, const Vec& x);

namespace detail {

// forward (defined after metric_project)
Vec metric_project_with_cuts(const ConvexSet& base,
                             const std::vector<HalfSpace>& cuts, const Vec& x,
                             std::vector<double>* lams, int* evals);

}  // namespace detail

inline Vec metric_project(const ConvexSet& set, const Vec& x) {
  if (x.size() != set.dim())
    throw DimensionError("metric_project: bad dimension");
  switch (set.kind()) {
    case SetKind::whole_space:
      return x;
    case SetKind::box: {
      Vec v = x;
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::min(std::max(v[i], set.lower()[i]), set.upper()[i]);
      return v;
    }
    case SetKind::ball: {
      Vec d = x - set.center();
      double n = norm2(d);
      if (n <= set.radius()) return x;
      return set.center() + (set.radius() / n) * d;
    }
    case SetKind::halfspace:
      return detail::project_halfspace_euclid(set.hs(), x);
    case SetKind::affine: {
      Vec v(x.size());
      for (const Vec& b : set.basis()) v = v + dot(x, b) * b;
      return v;
    }
    case SetKind::with_cuts:
      return detail::metric_project_with_cuts(set.base(), set.cuts(), x,
                                              nullptr, nullptr);
  }
  return x;
}

namespace detail {

// Drops numerically zero cut normals (the scheme emits them when successive
// iterates coincide); the survivors are the real constraints.
inline std::vector<HalfSpace> live_cuts(const std::vector<HalfSpace>& cuts) {
  std::vector<HalfSpace> live;
  for (const auto& c : cuts)
    if (!c.zero_normal()) live.push_back(c);
  return live;
}

// Alternating-projection feasibility probe used to confirm suspected
// infeasibility of base /\ cuts before giving up.
inline bool pocs_feasible(const ConvexSet& base,
                          const std::vector<HalfSpace>& cuts, Vec z,
                          double tol, int iters = 2000) {
  for (int k = 0; k < iters; ++k) {
    z = metric_project(base, z);
    for (const auto& c : cuts) z = project_halfspace_euclid(c, z);
    double v = violation(base, z);
    for (const auto& c : cuts) v = std::max(v, halfspace_violation(c, z));
    if (v <= tol) return true;
  }
  return false;
}

// Dual coordinate solve for projecting onto base /\ {<=2 cuts}. `inner`
// maps a shifted dual point w to the projection of J^{-1}(w) onto the base;
// in euclidean geometry J is the identity. Multipliers follow the convention
// Jv = Jx - sum_i lambda_i a_i.
template <class Inner>
Vec dual_cut_solve(const SpaceGeometry& space, const Vec& x,
                   const std::vector<HalfSpace>& cuts_in, Inner&& inner,
                   const ConvexSet& base, double tol,
                   std::vector<double>* lams_out, int* evals_out) {
  std::vector<HalfSpace> cuts = live_cuts(cuts_in);
  for (const auto& c : cuts_in)
    if (c.zero_normal() && c.offset < -1e-9)
      throw InfeasibleError("cut with zero normal and negative offset");
  if (lams_out) lams_out->assign(cuts_in.size(), 0.0);

  DualVec jx = duality_map(space, x);
  int evals = 0;

  auto point_at = [&](double l1, double l2) {
    DualVec w = jx;
    if (!cuts.empty()) w = w - l1 * cuts[0].normal;
    if (cuts.size() > 1) w = w - l2 * cuts[1].normal;
    ++evals;
    return inner(w);
  };
  auto gap = [&](const Vec& v, std::size_t i) {
    return pairing(v, cuts[i].normal) - cuts[i].offset;
  };

  if (cuts.empty()) {
    Vec v = point_at(0.0, 0.0);
    if (evals_out) *evals_out = evals;
    return v;
  }

  const double f1tol = tol * std::max(1.0, norm2(cuts[0].normal));
  const double f2tol =
      cuts.size() > 1 ? tol * std::max(1.0, norm2(cuts[1].normal)) : 0.0;
  const double lam_cap = 1e14;

  // returns lambda1 >= 0 solving gap1 = 0 at fixed lambda2 (0 if inactive)
  auto solve_l1 = [&](double l2) -> double {
    Vec v0 = point_at(0.0, l2);
    double d0 = gap(v0, 0);
    if (d0 <= f1tol) return 0.0;
    double hi = 1.0, dhi = d0, lo = 0.0, dlo = d0;
    while (true) {
      Vec v = point_at(hi, l2);
      dhi = gap(v, 0);
      if (dhi <= f1tol) break;
      lo = hi;
      dlo = dhi;
      hi *= 4.0;
      if (hi > lam_cap) {
        if (!pocs_feasible(base, cuts, x, 1e-8 * (1.0 + norm2(x))))
          throw InfeasibleError(
              "projection with cuts: dual diverged (empty intersection)");
        return hi;  // touching face: accept the cap point
      }
    }
    if (dhi >= -f1tol) return hi;
    auto f = [&](double l) { return gap(point_at(l, l2), 0); };
    return solve_bracketed(f, lo, hi, dlo, dhi, f1tol * 1e-3, 200).x;
  };

  double l1 = 0.0, l2 = 0.0;
  if (cuts.size() == 1) {
    l1 = solve_l1(0.0);
  } else {
    // outer root find on the marginal gap of cut 2
    auto marginal = [&](double l2v, double* l1v) {
      double l1s = solve_l1(l2v);
      if (l1v) *l1v = l1s;
      return gap(point_at(l1s, l2v), 1);
    };
    double d0 = marginal(0.0, &l1);
    if (d0 <= f2tol) {
      l2 = 0.0;
    } else {
      double lo = 0.0, dlo = d0, hi = 1.0, dhi = d0;
      while (true) {
        dhi = marginal(hi, nullptr);
        if (dhi <= f2tol) break;
        lo = hi;
        dlo = dhi;
        hi *= 4.0;
        if (hi > lam_cap) {
          if (!pocs_feasible(base, cuts, x, 1e-8 * (1.0 + norm2(x))))
            throw InfeasibleError(
                "projection with cuts: dual diverged (empty intersection)");
          break;
        }
      }
      if (dhi >= -f2tol || hi > lam_cap) {
        l2 = hi;
      } else {
        auto f = [&](double l) { return marginal(l, nullptr); };
        l2 = solve_bracketed(f, lo, hi, dlo, dhi, f2tol * 1e-3, 200).x;
      }
      l1 = solve_l1(l2);
    }
  }

  Vec v = point_at(l1, l2);
  if (lams_out) {
    // map multipliers back to the caller's cut order
    std::size_t k = 0;
    for (std::size_t i = 0; i < cuts_in.size(); ++i) {
      if (cuts_in[i].zero_normal()) continue;
      (*lams_out)[i] = (k == 0 ? l1 : l2);
      ++k;
    }
  }
  if (evals_out) *evals_out = evals;
  return v;
}

inline Vec metric_project_with_cuts(const ConvexSet& base,
                                    const std::vector<HalfSpace>& cuts,
                                    const Vec& x, std::vector<double>* lams,
                                    int* evals) {
  std::vector<HalfSpace> live = live_cuts(cuts);
  for (const auto& c : cuts)
    if (c.zero_normal() && c.offset < -1e-9)
      throw InfeasibleError("cut with zero normal and negative offset");
  if (base.kind() == SetKind::whole_space) {
    std::vector<double> ll;
    Vec v = project_two_cuts_euclid(live, x, &ll);
    if (lams) {
      lams->assign(cuts.size(), 0.0);
      std::size_t k = 0;
      for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (cuts[i].zero_normal()) continue;
        (*lams)[i] = ll[k++];
      }
    }
    if (evals) *evals = 1;
    return v;
  }
  SpaceGeometry eu = SpaceGeometry::euclidean(x.size());
  auto inner = [&](const DualVec& w) {
    return metric_project(base, as_primal(w));
  };
  return dual_cut_solve(eu, x, cuts, inner, base, 1e-11, lams, evals);
}

// ---------------------------------------------------------------------------
// p-norm generalized projection pieces. Throughout, w = Jx and the problem is
//   minimize  h(v) = 1/2 |v|_p^2 - <v, w>   over the set,
// whose solution is the minimizer of phi(., x).

// Given s (a guess of |v|_p), the per-coordinate stationarity
// s^{2-p} |t|^{p-1} sign(t) = w_i clamped to [l_i, u_i] is exact; the correct
// s is the root of |v(s)|_p - s.
inline Vec box_point_for_norm(const DualVec& w, const Vec& lo, const Vec& up,
                              double p, double s) {
  const double qm1 = 1.0 / (p - 1.0);
  const double spow = std::pow(s, (p - 2.0) * qm1);
  Vec v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double t = signed_pow(w[i], qm1) * spow;
    v[i] = std::min(std::max(t, lo[i]), up[i]);
  }
  return v;
}

inline Vec project_box_pnorm(const SpaceGeometry& space, const ConvexSet& box,
                             const Vec& x, int* evals) {
  DualVec w = duality_map(space, x);
  Vec clamp0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    clamp0[i] = std::min(std::max(0.0, box.lower()[i]), box.upper()[i]);
  if (norm2(w) == 0.0) return clamp0;  // minimize |v|_p over the box
  const double p = space.p;
  auto F = [&](double s) {
    Vec v = box_point_for_norm(w, box.lower(), box.upper(), p, s);
    return hybridep::norm(space, v) - s;
  };
  double slo = 1e-30;
  double flo = F(slo);
  if (flo <= 0.0) return clamp0;
  double shi = std::max(1.0, hybridep::norm(space, x));
  double fhi = F(shi);
  int grow = 0;
  while (fhi > 0.0) {
    slo = shi;
    flo = fhi;
    shi *= 4.0;
    fhi = F(shi);
    if (++grow > 400) throw ConvergenceError("box projection: no bracket");
  }
  RootResult r = solve_bracketed(F, slo, shi, flo, fhi, 1e-14 * (1.0 + shi), 300);
  if (evals) *evals = r.evaluations + grow + 2;
  Vec v = box_point_for_norm(w, box.lower(), box.upper(), p, r.x);
  // one fixed-point polish with the realized norm
  v = box_point_for_norm(w, box.lower(), box.upper(), p, hybridep::norm(space, v));
  return v;
}

// Solves A |t|^{p-1} sign(t) + lam * t = b for t (A >= 0, lam >= 0, monotone).
inline double coord_solve(double A, double lam, double b, double p) {
  if (b == 0.0) return 0.0;
  if (A <= 0.0) {
    if (lam <= 0.0) throw ConvergenceError("coord_solve: degenerate scales");
    return b / lam;
  }
  if (lam <= 0.0) return signed_pow(b / A, 1.0 / (p - 1.0));
  double R = 1.0 + std::min(std::fabs(b) / lam,
                            std::pow(std::fabs(b) / A, 1.0 / (p - 1.0)));
  auto f = [&](double t) { return A * signed_pow(t, p - 1.0) + lam * t - b; };
  double lo = b > 0.0 ? 0.0 : -R;
  double hi = b > 0.0 ? R : 0.0;
  return solve_bracketed(f, lo, hi, f(lo), f(hi),
                         1e-15 * (1.0 + std::fabs(b)), 200).x;
}

// Solves J_p(v) + lam (v - c) = w via the norm-scalar reduction.
inline Vec shifted_system_solve(const SpaceGeometry& space, const DualVec& w,
                                const Vec& c, double lam, int* evals) {
  const double p = space.p;
  const std::size_t d = w.size();
  auto v_for = [&](double s) {
    double A = std::pow(s, 2.0 - p);
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i)
      v[i] = coord_solve(A, lam, w[i] + lam * c[i], p);
    return v;
  };
  auto F = [&](double s) { return hybridep::norm(space, v_for(s)) - s; };
  double slo = 1e-30;
  double flo = F(slo);
  if (flo <= 0.0) return v_for(slo);
  double shi = 1.0;
  double fhi = F(shi);
  int grow = 0;
  while (fhi > 0.0) {
    slo = shi;
    flo = fhi;
    shi *= 4.0;
    fhi = F(shi);
    if (++grow > 400)
      throw ConvergenceError("shifted_system_solve: no bracket");
  }
  RootResult r =
      solve_bracketed(F, slo, shi, flo, fhi, 1e-14 * (1.0 + shi), 300);
  if (evals) *evals += r.evaluations + grow + 2;
  return v_for(r.x);
}

inline Vec project_ball_pnorm(const SpaceGeometry& space, const ConvexSet& bl,
                              const Vec& x, int* evals) {
  DualVec w = duality_map(space, x);
  int ev = 0;
  auto G = [&](double lam) {
    Vec v = shifted_system_solve(space, w, bl.center(), lam, &ev);
    return norm2(v - bl.center()) - bl.radius();
  };
  double lo = 0.0, flo = G(0.0);
  if (flo <= 0.0) return x;
  double hi = 1.0, fhi = G(hi);
  int grow = 0;
  while (fhi > 0.0) {
    lo = hi;
    flo = fhi;
    hi *= 4.0;
    fhi = G(hi);
    if (++grow > 200) throw ConvergenceError("ball projection: no bracket");
  }
  RootResult r = solve_bracketed(G, lo, hi, flo, fhi,
                                 1e-12 * (1.0 + bl.radius()), 200);
  if (evals) *evals = ev;
  return shifted_system_solve(space, w, bl.center(), r.x, &ev);
}

// Hessian of 1/2 |v|_p^2 (valid where defined; diagonal capped for p < 2).
inline Mat pnorm_hessian(const SpaceGeometry& space, const Vec& v) {
  const double p = space.p;
  const std::size_t d = v.size();
  double N = hybridep::norm(space, v);
  Mat H(d, d);
  if (N == 0.0) return Mat::identity(d);
  DualVec psi(d);
  for (std::size_t i = 0; i < d; ++i) psi[i] = signed_pow(v[i], p - 1.0);
  double c1 = (2.0 - p) * std::pow(N, 2.0 - 2.0 * p);
  double c2 = (p - 1.0) * std::pow(N, 2.0 - p);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) H(i, j) = c1 * psi[i] * psi[j];
    double diag = std::pow(std::fabs(v[i]), p - 2.0);
    if (!std::isfinite(diag) || diag > 1e14) diag = 1e14;
    H(i, i) += c2 * diag;
  }
  return H;
}

// Newton polish of the stationarity-plus-active-cut system
//   Jv - Jx + sum_i lam_i a_i = 0,   <v, a_i> = alpha_i.
// Root finding over the multipliers alone cannot reach full point precision
// when a coordinate of the dual argument crosses zero (the inverse duality
// map has infinite slope there); a few whole-system Newton steps fix that.
inline void kkt_polish_cuts(const SpaceGeometry& space, const DualVec& jx,
                            const std::vector<const HalfSpace*>& active,
                            Vec& v, std::vector<double>& lam) {
  const std::size_t d = space.dimension, m = active.size();
  if (m == 0) return;
  auto res_norm = [&](const Vec& vv, const std::vector<double>& ll) {
    DualVec r1 = duality_map(space, vv) - jx;
    for (std::size_t i = 0; i < m; ++i) r1 = r1 + ll[i] * active[i]->normal;
    double s = dot(r1, r1);
    for (std::size_t i = 0; i < m; ++i) {
      double r2 = pairing(vv, active[i]->normal) - active[i]->offset;
      s += r2 * r2;
    }
    return std::sqrt(s);
  };
  double cur = res_norm(v, lam);
  const double target = 1e-13 * (1.0 + dual_norm(space, jx));
  for (int it = 0; it < 12 && cur > target; ++it) {
    Mat K(d + m, d + m);
    Mat H = pnorm_hessian(space, v);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) K(i, j) = H(i, j);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        K(j, d + i) = active[i]->normal[j];
        K(d + i, j) = active[i]->normal[j];
      }
    Vec rhs(d + m);
    DualVec r1 = duality_map(space, v) - jx;
    for (std::size_t i = 0; i < m; ++i) r1 = r1 + lam[i] * active[i]->normal;
    for (std::size_t j = 0; j < d; ++j) rhs[j] = -r1[j];
    for (std::size_t i = 0; i < m; ++i)
      rhs[d + i] = -(pairing(v, active[i]->normal) - active[i]->offset);
    Vec step;
    try {
      step = solve_linear(K, rhs);
    } catch (const Error&) {
      return;
    }
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vec vn = v;
      std::vector<double> ln = lam;
      for (std::size_t j = 0; j < d; ++j) vn[j] += t * step[j];
      for (std::size_t i = 0; i < m; ++i) ln[i] += t * step[d + i];
      double nn = res_norm(vn, ln);
      if (nn < cur) {
        v = vn;
        lam = ln;
        cur = nn;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) return;
  }
}

inline Vec project_affine_pnorm(const SpaceGeometry& space,
                                const ConvexSet& sub, const Vec& x,
                                int* evals) {
  const auto& B = sub.basis();
  const std::size_t k = B.size();
  if (k == 0) return Vec(x.size());  // the subspace {0}
  DualVec w = duality_map(space, x);

  auto lift = [&](const std::vector<double>& t) {
    Vec v(x.size());
    for (std::size_t j = 0; j < k; ++j) v = v + t[j] * B[j];
    return v;
  };
  auto gradient = [&](const Vec& v) {
    DualVec g = duality_map(space, v) - w;
    Vec gt(k);
    for (std::size_t j = 0; j < k; ++j) gt[j] = pairing(B[j], g);
    return gt;
  };

  std::vector<double> t(k);
  for (std::size_t j = 0; j < k; ++j) t[j] = dot(x, B[j]);
  Vec v = lift(t);
  const double gtol = 1e-13 * (1.0 + norm2(w));
  int it = 0;
  for (; it < 400; ++it) {
    Vec g = gradient(v);
    double gn = norm2(g);
    if (gn <= gtol) break;
    // reduced Newton direction with Levenberg damping
    Mat H = pnorm_hessian(space, v);
    Mat Ht(k, k);
    for (std::size_t a = 0; a < k; ++a) {
      Vec hb = mul(H, B[a]);
      for (std::size_t b = 0; b < k; ++b) Ht(a, b) = dot(B[b], hb);
    }
    double mu = 1e-12;
    Vec step(k);
    bool got = false;
    for (int tries = 0; tries < 20 && !got; ++tries) {
      Mat Hd = Ht;
      for (std::size_t a = 0; a < k; ++a) Hd(a, a) += mu;
      try {
        step = solve_linear(Hd, -1.0 * g);
        got = dot(step, g) < 0.0;
      } catch (const Error&) {
        got = false;
      }
      mu *= 100.0;
    }
    if (!got) step = -1.0 * g;
    // backtracking line search on the gradient norm; an objective-decrease
    // test goes blind once the remaining decrease drops under rounding
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      std::vector<double> tn(k);
      for (std::size_t j = 0; j < k; ++j) tn[j] = t[j] + alpha * step[j];
      Vec vn = lift(tn);
      if (norm2(gradient(vn)) < gn) {
        t = tn;
        v = vn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // at numerical stationarity
  }
  if (evals) *evals = it;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generalized projection Pi_C x = argmin_{v in C} phi(v, x).

inline ProjectionResult generalized_project(const SpaceGeometry& space,
                                            const ConvexSet& set, const Vec& x,
                                            double tol = 1e-9);

namespace detail {

inline ProjectionResult pack(Vec v, std::vector<double> lams, int evals,
                             double residual) {
  return ProjectionResult{std::move(v), std::move(lams), evals, residual};
}

inline ProjectionResult generalized_project_pnorm(const SpaceGeometry& space,
                                                  const ConvexSet& set,
                                                  const Vec& x, double tol) {
  switch (set.kind()) {
    case SetKind::whole_space:
      return pack(x, {}, 0, 0.0);
    case SetKind::halfspace: {
      const HalfSpace& h = set.hs();
      if (h.zero_normal()) {
        if (h.offset < 0.0)
          throw InfeasibleError("projection onto empty half-space set");
        return pack(x, {0.0}, 0, 0.0);
      }
      if (halfspace_violation(h, x) <= 0.0) return pack(x, {0.0}, 0, 0.0);
      DualVec jx = duality_map(space, x);
      auto point_at = [&](double lam) {
        return inverse_duality_map(space, jx - lam * h.normal);
      };
      auto f = [&](double lam) {
        return pairing(point_at(lam), h.normal) - h.offset;
      };
      double ftol = tol * 1e-3 * std::max(1.0, norm2(h.normal));
      double lo = 0.0, flo = f(0.0), hi = 1.0, fhi = f(1.0);
      int grow = 0;
      while (fhi > 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 4.0;
        fhi = f(hi);
        if (++grow > 300)
          throw ConvergenceError("half-space projection: no bracket");
      }
      RootResult r = solve_bracketed(f, lo, hi, flo, fhi, ftol, 200);
      Vec v = point_at(r.x);
      std::vector<double> lam{r.x};
      kkt_polish_cuts(space, jx, {&h}, v, lam);
      lam[0] = std::max(lam[0], 0.0);
      return pack(v, lam, r.evaluations + grow,
                  std::fabs(halfspace_violation(h, v)));
    }
    case SetKind::box: {
      if (violation(set, x) <= 0.0) return pack(x, {}, 0, 0.0);
      int evals = 0;
      Vec v = project_box_pnorm(space, set, x, &evals);
      return pack(v, {}, evals, violation(set, v));
    }
    case SetKind::ball: {
      if (violation(set, x) <= 0.0) return pack(x, {}, 0, 0.0);
      int evals = 0;
      Vec v = project_ball_pnorm(space, set, x, &evals);
      return pack(v, {}, evals, std::fabs(violation(set, v)));
    }
    case SetKind::affine: {
      int evals = 0;
      Vec v = project_affine_pnorm(space, set, x, &evals);
      return pack(v, {}, evals, violation(set, v));
    }
    case SetKind::with_cuts: {
      const ConvexSet& base = set.base();
      auto inner = [&](const DualVec& w) {
        Vec y = inverse_duality_map(space, w);
        return generalized_project(space, base, y, tol).point;
      };
      std::vector<double> lams;
      int evals = 0;
      Vec v = dual_cut_solve(space, x, set.cuts(), inner, base, tol, &lams,
                             &evals);
      if (base.kind() == SetKind::whole_space) {
        // stationarity involves only the cuts: polishable as one KKT system
        std::vector<const HalfSpace*> act;
        std::vector<double> actl;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < set.cuts().size(); ++i)
          if (lams[i] > 0.0 && !set.cuts()[i].zero_normal()) {
            act.push_back(&set.cuts()[i]);
            actl.push_back(lams[i]);
            idx.push_back(i);
          }
        if (!act.empty()) {
          kkt_polish_cuts(space, duality_map(space, x), act, v, actl);
          for (std::size_t k = 0; k < idx.size(); ++k)
            lams[idx[k]] = std::max(0.0, actl[k]);
        }
      }
      double res = std::max(0.0, violation(set, v));
      return pack(v, lams, evals, res);
    }
  }
  throw Error("generalized_project: unknown set kind");
}

}  // namespace detail

inline ProjectionResult generalized_project(const SpaceGeometry& space,
                                            const ConvexSet& set, const Vec& x,
                                            double tol) {
  check_dim(space, x.size(), "generalized_project");
  if (set.dim() != space.dimension)
    throw DimensionError("generalized_project: set dimension mismatch");
  if (space.hilbert()) {
    // phi(v, x) = |v - x|^2: the generalized projection is the metric one
    switch (set.kind()) {
      case SetKind::halfspace: {
        double lam;
        Vec v = detail::project_halfspace_euclid(set.hs(), x, &lam);
        return detail::pack(v, {lam}, 1, std::max(0.0, violation(set, v)));
      }
      case SetKind::with_cuts: {
        std::vector<double> lams;
        int evals = 0;
        Vec v = detail::metric_project_with_cuts(set.base(), set.cuts(), x,
                                                 &lams, &evals);
        return detail::pack(v, lams, evals, std::max(0.0, violation(set, v)));
      }
      default: {
        Vec v = metric_project(set, x);
        return detail::pack(v, {}, 1, std::max(0.0, violation(set, v)));
      }
    }
  }
  return detail::generalized_project_pnorm(space, set, x, tol);
}

// Pi over base /\ cuts with the multiplier list exposed; the workhorse of the
// hybrid schemes' x_{n+1} = Pi_{C_n /\ Q_n} x0 step.
inline ProjectionResult project_onto_cuts(const SpaceGeometry& space,
                                          const ConvexSet& base,
                                          const std::vector<HalfSpace>& cuts,
                                          const Vec& x, double tol = 1e-9) {
  if (cuts.size() > 2)
    throw ConfigError("project_onto_cuts: at most two cuts");
  ConvexSet s = ConvexSet::with_cuts(base, cuts);
  return generalized_project(space, s, x, tol);
}

// ---------------------------------------------------------------------------
// Cut constructors

// {v : phi(v, y_n) <= phi(v, x_n)} in <= form: the quadratic terms cancel and
// membership is 2 <v, Jx_n - Jy_n> <= |x_n|^2 - |y_n|^2.
inline HalfSpace cut_from_lyapunov_comparison(const SpaceGeometry& space,
                                              const Vec& y_n, const Vec& x_n) {
  DualVec a = duality_map(space, x_n) - duality_map(space, y_n);
  double nx = norm(space, x_n), ny = norm(space, y_n);
  return HalfSpace{2.0 * a, nx * nx - ny * ny};
}

// {z : <x_n - z, Jx_n - Jx0> <= 0} in <= form.
inline HalfSpace cut_from_anchor(const SpaceGeometry& space, const Vec& x_n,
                                 const Vec& x0) {
  DualVec a = duality_map(space, x0) - duality_map(space, x_n);
  return HalfSpace{a, pairing(x_n, a)};
}

// ---------------------------------------------------------------------------
// Probing support: draws a point of the set (used by residual checks and the
// sampled invariant suites; distributions are convenient, not uniform).

inline Vec sample_point(const ConvexSet& set, Rng& rng, double spread = 1.0) {
  switch (set.kind()) {
    case SetKind::whole_space:
      return rng.normal_vec(set.dim(), spread);
    case SetKind::box: {
      Vec v(set.dim());
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = rng.uniform(set.lower()[i], set.upper()[i]);
      return v;
    }
    case SetKind::ball: {
      Vec d = rng.normal_vec(set.dim());
      double n = norm2(d);
      if (n == 0.0) return set.center();
      double u = std::pow(rng.uniform(0.0, 1.0),
                          1.0 / static_cast<double>(set.dim()));
      return set.center() + (set.radius() * u / n) * d;
    }
    case SetKind::halfspace: {
      Vec v = rng.normal_vec(set.dim(), spread);
      return detail::project_halfspace_euclid(set.hs(), v);
    }
    case SetKind::affine: {
      Vec v(set.dim());
      for (const Vec& b : set.basis()) v = v + rng.normal(0.0, spread) * b;
      return v;
    }
    case SetKind::with_cuts: {
      Vec v = sample_point(set.base(), rng, spread);
      return detail::metric_project_with_cuts(set.base(), set.cuts(), v,
                                              nullptr, nullptr);
    }
  }
  return Vec(set.dim());
}

// Produces some feasible point or throws InfeasibleError; used when loading
// problems to confirm the configured set is usable.
inline Vec any_feasible_point(const ConvexSet& set) {
  Vec zero(set.dim());
  switch (set.kind()) {
    case SetKind::with_cuts: {
      Vec v = detail::metric_project_with_cuts(set.base(), set.cuts(), zero,
                                               nullptr, nullptr);
      if (violation(set, v) > 1e-7)
        throw InfeasibleError("set appears empty");
      return v;
    }
    case SetKind::halfspace:
      return detail::project_halfspace_euclid(set.hs(), zero);
    default:
      return metric_project(set, zero);
  }
}

}  // namespace hybridep
