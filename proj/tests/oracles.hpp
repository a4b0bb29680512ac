#pragma once

// Independent reference computations used only by the tests. Everything here
// deliberately avoids the library's own closed forms: long-double term-by-term
// evaluation, finite differences, and brute-force grid minimizers.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "hybridep/core.hpp"
#include "hybridep/geometry.hpp"

namespace oracles {

using hybridep::Vec;

inline long double pnorm_ld(const Vec& x, long double p) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += std::pow(std::fabs(static_cast<long double>(x[i])), p);
  return std::pow(s, 1.0L / p);
}

inline std::vector<long double> duality_ld(const Vec& x, long double p) {
  std::vector<long double> j(x.size(), 0.0L);
  long double n = pnorm_ld(x, p);
  if (n == 0.0L) return j;
  long double scale = std::pow(n, 2.0L - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double xi = x[i];
    if (xi == 0.0L) continue;
    j[i] = scale * std::pow(std::fabs(xi), p - 1.0L) * (xi > 0 ? 1.0L : -1.0L);
  }
  return j;
}

// phi(x, y) with long-double arithmetic throughout.
inline double phi_ld(const Vec& x, const Vec& y, double p) {
  long double nx = pnorm_ld(x, p), ny = pnorm_ld(y, p);
  std::vector<long double> jy = duality_ld(y, p);
  long double ip = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i)
    ip += static_cast<long double>(x[i]) * jy[i];
  return static_cast<double>(nx * nx - 2.0L * ip + ny * ny);
}

// Central-difference gradient of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f,
                            const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Golden-section minimizer on [a, b].
inline double golden_min(const std::function<double(double)>& f, double a,
                         double b, double tol = 1e-12) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::fabs(a) + std::fabs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Dense-grid + refinement minimizer of f over [lo, hi] (2 or 3 dims) subject
// to feasible(v); resolves the argmin to roughly 1e-8 of the box width.
inline Vec grid_refine_min(const std::function<double(const Vec&)>& f,
                           const std::function<bool(const Vec&)>& feasible,
                           Vec lo, Vec hi, int levels = 9, int cells = 40) {
  const std::size_t d = lo.size();
  Vec best = lo;
  double fbest = std::numeric_limits<double>::infinity();
  for (int lev = 0; lev < levels; ++lev) {
    Vec blo = lo, bhi = hi, arg = best;
    double fb = std::numeric_limits<double>::infinity();
    std::vector<int> idx(d, 0);
    while (true) {
      Vec v(d);
      for (std::size_t k = 0; k < d; ++k)
        v[k] = lo[k] + (hi[k] - lo[k]) * idx[k] / cells;
      if (feasible(v)) {
        double fv = f(v);
        if (fv < fb) {
          fb = fv;
          arg = v;
        }
      }
      std::size_t k = 0;
      while (k < d && ++idx[k] > cells) idx[k++] = 0;
      if (k == d) break;
    }
    if (fb < fbest) {
      fbest = fb;
      best = arg;
    }
    // shrink the window around the incumbent
    for (std::size_t k = 0; k < d; ++k) {
      double w = (hi[k] - lo[k]) * 2.5 / cells;
      double c = best[k];
      blo[k] = std::max(lo[k], c - w);
      bhi[k] = std::min(hi[k], c + w);
    }
    lo = blo;
    hi = bhi;
  }
  return best;
}

// Active-set enumeration oracle for the euclidean box-constrained resolvent
// of f(x,y) = <Mx + q, y - x>: z solves per-coordinate KKT of
//   psi(z) = r (Mz + q) + z - x,   psi_i = 0 (free), >= 0 (lower), <= 0 (upper).
// Enumerates all 3^d lower/free/upper patterns and returns the consistent one.
inline Vec resolvent_box_kkt(const hybridep::Mat& M, const Vec& q, double r,
                             const Vec& x, const Vec& lo, const Vec& hi) {
  using hybridep::Mat;
  const std::size_t d = x.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> pat(d);  // 0 lower, 1 free, 2 upper
    std::size_t c = code;
    for (std::size_t i = 0; i < d; ++i) {
      pat[i] = static_cast<int>(c % 3);
      c /= 3;
    }
    std::vector<std::size_t> free_idx;
    Vec z(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (pat[i] == 0)
        z[i] = lo[i];
      else if (pat[i] == 2)
        z[i] = hi[i];
      else
        free_idx.push_back(i);
    }
    // solve (rM + I)_FF z_F = (x - r q)_F - (rM)_FB z_B
    const std::size_t nf = free_idx.size();
    if (nf > 0) {
      Mat A(nf, nf);
      Vec b(nf);
      for (std::size_t a = 0; a < nf; ++a) {
        std::size_t i = free_idx[a];
        b[a] = x[i] - r * q[i];
        for (std::size_t j = 0; j < d; ++j) {
          bool is_free = pat[j] == 1;
          double mij = r * M(i, j) + (i == j ? 1.0 : 0.0);
          if (!is_free) b[a] -= mij * z[j];
        }
        for (std::size_t bcol = 0; bcol < nf; ++bcol) {
          std::size_t j = free_idx[bcol];
          A(a, bcol) = r * M(i, j) + (i == j ? 1.0 : 0.0);
        }
      }
      Vec zf;
      try {
        zf = hybridep::solve_linear(A, b);
      } catch (const hybridep::Error&) {
        continue;
      }
      for (std::size_t a = 0; a < nf; ++a) z[free_idx[a]] = zf[a];
    }
    // verify bounds and sign conditions
    bool ok = true;
    Vec psi = r * (hybridep::mul(M, z) + q) + z - x;
    for (std::size_t i = 0; i < d && ok; ++i) {
      if (pat[i] == 1)
        ok = z[i] >= lo[i] - 1e-12 && z[i] <= hi[i] + 1e-12;
      else if (pat[i] == 0)
        ok = psi[i] >= -1e-10;
      else
        ok = psi[i] <= 1e-10;
    }
    if (ok) return z;
  }
  throw std::runtime_error("resolvent_box_kkt: no consistent pattern");
}

}  // namespace oracles
