#pragma once

// Bifunction catalog and the resolvent operator T_r: the unique z in C with
//   f(z, y) + (1/r) <y - z, Jz - Jx>  >=  0   for all y in C.
//
// Catalog variants keep the monotone-bifunction conditions certifiable:
//   zero                f == 0; T_r is the generalized projection onto C
//   vi(M, q)            f(x,y) = <Mx + q, y - x>; monotone iff M is PSD
//   convex_difference   f(x,y) = g(y) - g(x) for a convex g from a small
//                       catalog (quadratic, smoothed norm)
//
// The resolvent condition is the variational inequality VI(C, Psi) with
// Psi(z) = r*field(z) + Jz - Jx, where field is the bifunction's gradient-type
// operator. Euclidean instances use a projected fixed-point iteration with a
// contraction-rate-aware stop; p-norm instances use an extragradient loop in
// dual coordinates with the natural residual as merit.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hybridep/core.hpp"
#include "hybridep/geometry.hpp"
#include "hybridep/sets.hpp"

namespace hybridep {

enum class BifunctionKind { zero, vi, convex_difference };
enum class ConvexFunctionKind { quadratic, norm_like };

class Bifunction {
public:
  static Bifunction zero(std::size_t dim) {
    Bifunction f;
    f.kind_ = BifunctionKind::zero;
    f.dim_ = dim;
    return f;
  }

  // f(x, y) = <Mx + q, y - x>. M need not be PSD at construction time;
  // check_conditions exposes monotonicity failures.
  static Bifunction vi(Mat M, Vec q) {
    if (M.rows != M.cols || M.rows != q.size())
      throw DimensionError("Bifunction::vi: M must be square and match q");
    Bifunction f;
    f.kind_ = BifunctionKind::vi;
    f.dim_ = q.size();
    f.M_ = std::move(M);
    f.q_ = std::move(q);
    return f;
  }

  // f(x, y) = g(y) - g(x) with g(v) = 1/2 <Av, v> + <b, v>.
  static Bifunction quadratic_difference(Mat A, Vec b) {
    if (A.rows != A.cols || A.rows != b.size())
      throw DimensionError("Bifunction::quadratic_difference: bad shapes");
    Bifunction f;
    f.kind_ = BifunctionKind::convex_difference;
    f.g_kind_ = ConvexFunctionKind::quadratic;
    f.dim_ = b.size();
    f.M_ = std::move(A);
    f.q_ = std::move(b);
    return f;
  }

  // f(x, y) = g(y) - g(x) with the smoothed norm
  // g(v) = c * sqrt(1 + |v - center|^2); convex and 1-smooth up to c.
  static Bifunction norm_like_difference(double c, Vec center) {
    if (!(c >= 0.0))
      throw ConfigError("Bifunction::norm_like_difference: c must be >= 0");
    Bifunction f;
    f.kind_ = BifunctionKind::convex_difference;
    f.g_kind_ = ConvexFunctionKind::norm_like;
    f.dim_ = center.size();
    f.coeff_ = c;
    f.q_ = std::move(center);
    return f;
  }

  BifunctionKind kind() const { return kind_; }
  ConvexFunctionKind g_kind() const { return g_kind_; }
  std::size_t dim() const { return dim_; }
  const Mat& matrix() const { return M_; }
  const Vec& shift() const { return q_; }
  double coefficient() const { return coeff_; }

  // gradient-type operator of the bifunction's second argument at x
  DualVec field(const Vec& x) const {
    switch (kind_) {
      case BifunctionKind::zero:
        return DualVec(dim_);
      case BifunctionKind::vi:
        return as_dual(mul(M_, x) + q_);
      case BifunctionKind::convex_difference:
        return g_gradient(x);
    }
    return DualVec(dim_);
  }

  // Lipschitz bound of the field (cheap norm-based estimate)
  double field_lipschitz() const {
    switch (kind_) {
      case BifunctionKind::zero:
        return 0.0;
      case BifunctionKind::vi:
        return frobenius_norm(M_);
      case BifunctionKind::convex_difference:
        return g_kind_ == ConvexFunctionKind::quadratic ? frobenius_norm(M_)
                                                        : coeff_;
    }
    return 0.0;
  }

  double g_value(const Vec& v) const {
    if (kind_ != BifunctionKind::convex_difference)
      throw ConfigError("g_value: not a convex_difference bifunction");
    if (g_kind_ == ConvexFunctionKind::quadratic)
      return 0.5 * dot(mul(M_, v), v) + dot(q_, v);
    Vec d = v - q_;
    return coeff_ * std::sqrt(1.0 + dot(d, d));
  }

  DualVec g_gradient(const Vec& v) const {
    if (g_kind_ == ConvexFunctionKind::quadratic)
      return as_dual(mul(M_, v) + q_);
    Vec d = v - q_;
    double s = std::sqrt(1.0 + dot(d, d));
    return as_dual((coeff_ / s) * d);
  }

private:
  Bifunction() = default;

  BifunctionKind kind_ = BifunctionKind::zero;
  ConvexFunctionKind g_kind_ = ConvexFunctionKind::quadratic;
  std::size_t dim_ = 0;
  Mat M_;
  Vec q_;
  double coeff_ = 0.0;
};

inline double evaluate(const Bifunction& f, const Vec& x, const Vec& y) {
  if (x.size() != f.dim() || y.size() != f.dim())
    throw DimensionError("evaluate: dimension mismatch");
  switch (f.kind()) {
    case BifunctionKind::zero:
      return 0.0;
    case BifunctionKind::vi:
      return pairing(y - x, f.field(x));
    case BifunctionKind::convex_difference:
      return f.g_value(y) - f.g_value(x);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Sampled condition checks: (A1) vanishing diagonal, (A2) monotonicity,
// (A4) convexity in the second argument. (A3) hemicontinuity holds by
// construction for every catalog variant and has no finite test.

struct ConditionsReport {
  bool a1_ok = true, a2_ok = true, a4_ok = true;
  double worst_a1 = 0.0;  // max |f(x,x)|
  double worst_a2 = 0.0;  // max f(x,y)+f(y,x)
  double worst_a4 = 0.0;  // max midpoint-convexity violation
  int violations = 0;

  bool ok() const { return a1_ok && a2_ok && a4_ok; }
};

inline ConditionsReport check_conditions(const Bifunction& f,
                                         int sample_count = 500,
                                         double tol = 1e-9,
                                         std::uint64_t seed = 0x5eed) {
  ConditionsReport rep;
  Rng rng(seed);
  const std::size_t d = f.dim();
  for (int k = 0; k < sample_count; ++k) {
    Vec x = rng.uniform_vec(d, -3.0, 3.0);
    Vec y = rng.uniform_vec(d, -3.0, 3.0);
    double a1 = std::fabs(evaluate(f, x, x));
    rep.worst_a1 = std::max(rep.worst_a1, a1);
    if (a1 > tol) {
      rep.a1_ok = false;
      ++rep.violations;
    }
    double a2 = evaluate(f, x, y) + evaluate(f, y, x);
    rep.worst_a2 = std::max(rep.worst_a2, a2);
    if (a2 > tol) {
      rep.a2_ok = false;
      ++rep.violations;
    }
    Vec y2 = rng.uniform_vec(d, -3.0, 3.0);
    Vec mid = 0.5 * (y + y2);
    double a4 = evaluate(f, x, mid) -
                0.5 * (evaluate(f, x, y) + evaluate(f, x, y2));
    rep.worst_a4 = std::max(rep.worst_a4, a4);
    if (a4 > tol) {
      rep.a4_ok = false;
      ++rep.violations;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Resolvent

struct ResolventParams {
  double r = 1.0;
  double inner_tol = 1e-10;
  int max_inner_iterations = 100000;
};

namespace detail {

// Projected fixed-point iteration for the euclidean VI(C, Psi) with
// Psi(z) = r*field(z) + z - x; strongly monotone with modulus >= 1.
inline Vec resolvent_euclid_iterative(const ConvexSet& C, const Bifunction& f,
                                      const ResolventParams& prm,
                                      const Vec& x) {
  if (C.kind() == SetKind::whole_space && f.kind() == BifunctionKind::vi) {
    // unconstrained affine VI: solve (I + r M) z = x - r q directly
    const Mat& M = f.matrix();
    const std::size_t d = x.size();
    Mat A(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        A(i, j) = prm.r * M(i, j) + (i == j ? 1.0 : 0.0);
    return solve_linear(A, x - prm.r * f.shift());
  }
  const double L = 1.0 + prm.r * f.field_lipschitz();
  const double gamma = 1.0 / (L * L);  // optimal for modulus mu = 1
  const double mod = std::sqrt(std::max(0.0, 1.0 - 1.0 / (L * L)));
  const double stop = prm.inner_tol * std::max(1.0 - mod, 1e-6);
  Vec z = metric_project(C, x);
  for (int k = 0; k < prm.max_inner_iterations; ++k) {
    Vec psi = prm.r * as_primal(f.field(z)) + z - x;
    Vec zn = metric_project(C, z - gamma * psi);
    double diff = norm2(zn - z);
    z = zn;
    if (diff <= stop) return z;
  }
  throw ConvergenceError("resolvent: euclidean inner iteration cap reached");
}

// Extragradient iteration in dual coordinates for p-norm spaces:
//   zbar = Pi_C J^{-1}(Jz - gamma Psi(z)),  z+ = Pi_C J^{-1}(Jz - gamma Psi(zbar))
// with Psi(z) = r*field(z) + Jz - Jx and the natural residual |z - zbar| as
// merit. The step halves when the merit stalls.
inline Vec resolvent_pnorm_iterative(const SpaceGeometry& space,
                                     const ConvexSet& C, const Bifunction& f,
                                     const ResolventParams& prm, const Vec& x) {
  const DualVec jx = duality_map(space, x);
  auto psi = [&](const Vec& z) {
    DualVec v = f.field(z);
    return prm.r * v + (duality_map(space, z) - jx);
  };
  double gamma = 1.0 / (1.0 + prm.r * f.field_lipschitz());
  Vec z = generalized_project(space, C, x, prm.inner_tol).point;
  double best_merit = std::numeric_limits<double>::infinity();
  int stall = 0;
  const double proj_tol = std::min(1e-10, prm.inner_tol);
  for (int k = 0; k < prm.max_inner_iterations; ++k) {
    DualVec pz = psi(z);
    Vec zbar = generalized_project(
                   space, C, inverse_duality_map(space, duality_map(space, z) - gamma * pz),
                   proj_tol)
                   .point;
    double merit = norm2(z - zbar);
    if (merit <= prm.inner_tol * (1.0 + norm2(z))) return zbar;
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      stall = 0;
    } else if (++stall > 40) {
      gamma *= 0.5;
      stall = 0;
      if (gamma < 1e-12)
        throw ConvergenceError("resolvent: step collapsed without converging");
    }
    DualVec pzbar = psi(zbar);
    z = generalized_project(
            space, C, inverse_duality_map(space, duality_map(space, z) - gamma * pzbar),
            proj_tol)
            .point;
  }
  throw ConvergenceError("resolvent: p-norm inner iteration cap reached");
}

}  // namespace detail

// T_r(x): the resolvent of f over C at parameter r.
inline Vec resolvent(const SpaceGeometry& space, const ConvexSet& C,
                     const Bifunction& f, const ResolventParams& prm,
                     const Vec& x) {
  if (!(prm.r > 0.0)) throw ConfigError("resolvent: r must be positive");
  check_dim(space, x.size(), "resolvent");
  if (f.dim() != space.dimension)
    throw DimensionError("resolvent: bifunction dimension mismatch");
  if (f.kind() == BifunctionKind::zero)
    return generalized_project(space, C, x, prm.inner_tol).point;
  if (space.hilbert())
    return detail::resolvent_euclid_iterative(C, f, prm, x);
  return detail::resolvent_pnorm_iterative(space, C, f, prm, x);
}

// Worst-case certificate for a claimed resolvent output: the minimum over
// sampled y in C of f(z,y) + (1/r) <y - z, Jz - Jx>. A correct z stays above
// -tol; a perturbed z goes clearly negative.
inline double resolvent_residual(const SpaceGeometry& space, const ConvexSet& C,
                                 const Bifunction& f, double r, const Vec& x,
                                 const Vec& z, int probes = 1000,
                                 std::uint64_t seed = 0x5eed) {
  if (!(r > 0.0)) throw ConfigError("resolvent_residual: r must be positive");
  Rng rng(seed);
  DualVec jdiff = duality_map(space, z) - duality_map(space, x);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < probes; ++k) {
    Vec y = sample_point(C, rng, 2.0);
    double val = evaluate(f, z, y) + (1.0 / r) * pairing(y - z, jdiff);
    worst = std::min(worst, val);
  }
  return worst;
}

}  // namespace hybridep
