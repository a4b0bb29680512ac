#pragma once

// Finite-dimensional smooth, strictly convex space instances: the euclidean
// space and the p-norm space on R^d for 1 < p < infinity. Provides the norm,
// the dual norm, the normalized duality mapping J, its inverse, and the
// Lyapunov functional phi(x, y) = |x|^2 - 2<x, Jy> + |y|^2.

#include <cmath>
#include <cstddef>
#include <string>

#include "hybridep/core.hpp"

namespace hybridep {

enum class SpaceKind { euclidean, p_norm };

struct SpaceGeometry {
  SpaceKind kind = SpaceKind::euclidean;
  std::size_t dimension = 0;
  double p = 2.0;  // norm exponent; fixed to 2 for the euclidean kind

  static SpaceGeometry euclidean(std::size_t d) {
    if (d < 1) throw ConfigError("SpaceGeometry: dimension must be >= 1");
    return SpaceGeometry{SpaceKind::euclidean, d, 2.0};
  }

  // |x_i|^{p-1} conditioning degrades rapidly for extreme p; the accepted
  // range is (1.05, 50).
  static SpaceGeometry lp(std::size_t d, double p) {
    if (d < 1) throw ConfigError("SpaceGeometry: dimension must be >= 1");
    if (!(p > 1.05 && p < 50.0))
      throw ConfigError("SpaceGeometry: p must lie in (1.05, 50), got " +
                        std::to_string(p));
    return SpaceGeometry{SpaceKind::p_norm, d, p};
  }

  // Dual exponent q with 1/p + 1/q = 1.
  double q() const { return p / (p - 1.0); }

  // True when the space carries the inner-product geometry (J = identity).
  bool hilbert() const { return kind == SpaceKind::euclidean || p == 2.0; }
};

namespace detail {

inline double p_norm_of(const std::vector<double>& c, double p) {
  if (p == 2.0) {
    double s = 0.0;
    for (double x : c) s += x * x;
    return std::sqrt(s);
  }
  double m = 0.0;
  for (double x : c) m = std::max(m, std::fabs(x));
  if (m == 0.0) return 0.0;
  // scale by the max coordinate so the powers stay in range
  double s = 0.0;
  for (double x : c) s += std::pow(std::fabs(x) / m, p);
  return m * std::pow(s, 1.0 / p);
}

// Duality map of an l_p space in coordinates:
//   (Jx)_i = |x|_p^{2-p} |x_i|^{p-1} sign(x_i),  J(0) = 0.
inline std::vector<double> p_duality(const std::vector<double>& c, double p) {
  std::vector<double> r(c.size(), 0.0);
  if (p == 2.0) return c;
  double n = p_norm_of(c, p);
  if (n == 0.0) return r;
  double scale = std::pow(n, 2.0 - p);
  for (std::size_t i = 0; i < c.size(); ++i)
    r[i] = scale * signed_pow(c[i], p - 1.0);
  return r;
}

}  // namespace detail

inline void check_dim(const SpaceGeometry& space, std::size_t d,
                      const char* what) {
  if (space.dimension != d)
    throw DimensionError(std::string(what) + ": expected dimension " +
                         std::to_string(space.dimension) + ", got " +
                         std::to_string(d));
}

inline double norm(const SpaceGeometry& space, const Vec& x) {
  check_dim(space, x.size(), "norm");
  return detail::p_norm_of(x.c, space.p);
}

// Norm of the dual space, i.e. the q-norm.
inline double dual_norm(const SpaceGeometry& space, const DualVec& xs) {
  check_dim(space, xs.size(), "dual_norm");
  return detail::p_norm_of(xs.c, space.q());
}

inline DualVec duality_map(const SpaceGeometry& space, const Vec& x) {
  check_dim(space, x.size(), "duality_map");
  return DualVec(detail::p_duality(x.c, space.p));
}

inline Vec inverse_duality_map(const SpaceGeometry& space, const DualVec& xs) {
  check_dim(space, xs.size(), "inverse_duality_map");
  return Vec(detail::p_duality(xs.c, space.q()));
}

// phi(x, y) = |x|^2 - 2 <x, Jy> + |y|^2; equals |x - y|^2 in the euclidean
// case and is nonnegative in general.
inline double lyapunov(const SpaceGeometry& space, const Vec& x,
                       const Vec& y) {
  check_dim(space, x.size(), "lyapunov");
  check_dim(space, y.size(), "lyapunov");
  double nx = norm(space, x);
  double ny = norm(space, y);
  return nx * nx - 2.0 * pairing(x, duality_map(space, y)) + ny * ny;
}

// J^{-1}(t Jx + (1-t) Jy). Endpoints and coincident arguments are returned
// exactly so that degenerate scheme configurations collapse bitwise.
inline Vec dual_combine(const SpaceGeometry& space, double t, const Vec& x,
                        const Vec& y) {
  if (t == 1.0) return x;
  if (t == 0.0) return y;
  if (x == y) return x;
  DualVec jx = duality_map(space, x);
  DualVec jy = duality_map(space, y);
  return inverse_duality_map(space, t * jx + (1.0 - t) * jy);
}

}  // namespace hybridep
