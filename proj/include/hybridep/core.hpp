#pragma once

// Small dense vector/matrix kit and scalar root finding shared by all modules.
// Everything here is sized for desk-scale problems (d <= a few dozen); no
// attempt is made at cache blocking or vectorization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hybridep {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

// A constraint system turned out to be empty (or numerically indistinguishable
// from empty).
class InfeasibleError : public Error {
public:
  using Error::Error;
};

// An inner iterative solver hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

namespace detail {

// Coordinate tuple; the tag keeps primal points and dual functionals from
// being mixed up at compile time.
template <class Tag>
struct Coords {
  std::vector<double> c;

  Coords() = default;
  explicit Coords(std::size_t d) : c(d, 0.0) {}
  explicit Coords(std::vector<double> v) : c(std::move(v)) {}
  Coords(std::initializer_list<double> v) : c(v) {}

  std::size_t size() const { return c.size(); }
  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }

  bool finite() const {
    for (double x : c)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

template <class Tag>
inline void check_dims(const Coords<Tag>& a, const Coords<Tag>& b,
                       const char* what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
}

template <class Tag>
inline Coords<Tag> operator+(const Coords<Tag>& a, const Coords<Tag>& b) {
  check_dims(a, b, "operator+");
  Coords<Tag> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

template <class Tag>
inline Coords<Tag> operator-(const Coords<Tag>& a, const Coords<Tag>& b) {
  check_dims(a, b, "operator-");
  Coords<Tag> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

template <class Tag>
inline Coords<Tag> operator*(double t, const Coords<Tag>& a) {
  Coords<Tag> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = t * a[i];
  return r;
}

template <class Tag>
inline Coords<Tag> operator-(const Coords<Tag>& a) {
  return -1.0 * a;
}

template <class Tag>
inline bool operator==(const Coords<Tag>& a, const Coords<Tag>& b) {
  return a.c == b.c;
}

// Euclidean inner product of two same-type coordinate tuples.
template <class Tag>
inline double dot(const Coords<Tag>& a, const Coords<Tag>& b) {
  check_dims(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class Tag>
inline double norm2(const Coords<Tag>& a) {
  return std::sqrt(dot(a, a));
}

}  // namespace detail

using Vec = detail::Coords<struct PrimalTag>;
using DualVec = detail::Coords<struct DualTag>;

using detail::dot;
using detail::norm2;

// The duality pairing <x, x*>; in coordinates it is the plain dot product.
inline double pairing(const Vec& x, const DualVec& xs) {
  if (x.size() != xs.size())
    throw DimensionError("pairing: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * xs[i];
  return s;
}

inline DualVec as_dual(const Vec& x) { return DualVec(x.c); }
inline Vec as_primal(const DualVec& xs) { return Vec(xs.c); }

// ---------------------------------------------------------------------------
// Dense matrices (row major), used for affine operators and tiny solves.

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  Mat(std::size_t r, std::size_t c, std::vector<double> data)
      : rows(r), cols(c), a(std::move(data)) {
    if (a.size() != rows * cols) throw DimensionError("Mat: bad data size");
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Vec mul(const Mat& m, const Vec& x) {
  if (m.cols != x.size()) throw DimensionError("mul: dimension mismatch");
  Vec r(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

inline Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

inline Mat mul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw DimensionError("mul: dimension mismatch");
  Mat r(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

inline double frobenius_norm(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

// Gaussian elimination with partial pivoting. Throws on (numerically)
// singular systems.
inline Vec solve_linear(Mat m, Vec b) {
  if (m.rows != m.cols || m.rows != b.size())
    throw DimensionError("solve_linear: shape mismatch");
  const std::size_t n = m.rows;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(m(i, k)) > std::fabs(m(piv, k))) piv = i;
    if (std::fabs(m(piv, k)) < 1e-300)
      throw Error("solve_linear: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      double f = m(i, k) / m(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
      b[i] -= f * b[k];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
    x[i] = s / m(i, i);
  }
  return x;
}

// Orthonormalizes the given spanning vectors (modified Gram-Schmidt); near
// dependent directions are dropped.
inline std::vector<Vec> orthonormalize(const std::vector<Vec>& span,
                                       double tol = 1e-12) {
  // idempotency: an already-orthonormal family is returned verbatim, so a
  // serialize/deserialize cycle cannot drift the basis by an ulp
  bool already = !span.empty();
  for (std::size_t i = 0; already && i < span.size(); ++i) {
    if (std::fabs(norm2(span[i]) - 1.0) > 1e-14) already = false;
    for (std::size_t j = 0; already && j < i; ++j)
      if (std::fabs(dot(span[i], span[j])) > 1e-14) already = false;
  }
  if (already) return span;

  std::vector<Vec> basis;
  for (const Vec& v : span) {
    Vec w = v;
    for (const Vec& b : basis) w = w - dot(w, b) * b;
    // second pass for numerical orthogonality
    for (const Vec& b : basis) w = w - dot(w, b) * b;
    double n = norm2(w);
    if (n > tol * (1.0 + norm2(v))) basis.push_back((1.0 / n) * w);
  }
  return basis;
}

// Orthonormal basis of the null space of m, via elimination on m^T m.
inline std::vector<Vec> null_space(const Mat& m, double tol = 1e-10) {
  const std::size_t n = m.cols;
  Mat g = mul(transpose(m), m);
  // row reduce g, tracking pivot columns
  std::vector<std::size_t> pivot_col;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < n; ++col) {
    std::size_t piv = row;
    for (std::size_t i = row + 1; i < n; ++i)
      if (std::fabs(g(i, col)) > std::fabs(g(piv, col))) piv = i;
    if (std::fabs(g(piv, col)) <= tol * (1.0 + frobenius_norm(m))) continue;
    for (std::size_t j = 0; j < n; ++j) std::swap(g(row, j), g(piv, j));
    double d = g(row, col);
    for (std::size_t j = 0; j < n; ++j) g(row, j) /= d;
    for (std::size_t i = 0; i < n; ++i)
      if (i != row && g(i, col) != 0.0) {
        double f = g(i, col);
        for (std::size_t j = 0; j < n; ++j) g(i, j) -= f * g(row, j);
      }
    pivot_col.push_back(col);
    ++row;
  }
  std::vector<Vec> basis;
  for (std::size_t col = 0; col < n; ++col) {
    if (std::find(pivot_col.begin(), pivot_col.end(), col) != pivot_col.end())
      continue;
    Vec v(n);
    v[col] = 1.0;
    for (std::size_t r = 0; r < pivot_col.size(); ++r)
      v[pivot_col[r]] = -g(r, col);
    basis.push_back(v);
  }
  return orthonormalize(basis);
}

// ---------------------------------------------------------------------------
// Bracketed scalar root finding.

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Finds a root of f in [lo, hi] given f(lo) and f(hi) of opposite (or zero)
// sign. Secant steps with bisection safeguard. Terminates on |f| <= tol, or
// once the bracket shrinks to machine width (returning the best point seen,
// which matters for roots with infinite slope where |f| cannot reach tol).
template <class F>
RootResult solve_bracketed(F&& f, double lo, double hi, double flo, double fhi,
                           double tol, int max_iter = 200) {
  RootResult res;
  if (flo == 0.0) return {lo, 0.0, 0, true};
  if (fhi == 0.0) return {hi, 0.0, 0, true};
  if ((flo > 0.0) == (fhi > 0.0))
    throw Error("solve_bracketed: root not bracketed");
  double a = lo, b = hi, fa = flo, fb = fhi;
  double best = std::fabs(fa) < std::fabs(fb) ? a : b;
  double fbest = std::fabs(fa) < std::fabs(fb) ? fa : fb;
  for (int k = 0; k < max_iter; ++k) {
    double mid;
    // secant proposal, clipped into the middle 98% of the bracket
    double denom = fb - fa;
    if (denom != 0.0) {
      mid = b - fb * (b - a) / denom;
      double lo98 = a + 0.01 * (b - a), hi98 = b - 0.01 * (b - a);
      if (!(mid > lo98 && mid < hi98)) mid = 0.5 * (a + b);
    } else {
      mid = 0.5 * (a + b);
    }
    double fm = f(mid);
    ++res.evaluations;
    if (std::fabs(fm) < std::fabs(fbest)) {
      best = mid;
      fbest = fm;
    }
    if (std::fabs(fm) <= tol) {
      res.x = mid;
      res.fx = fm;
      res.converged = true;
      return res;
    }
    if ((fm > 0.0) == (fa > 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
      fb = fm;
    }
    if ((b - a) <= 4e-16 * (std::fabs(a) + std::fabs(b)) + 1e-300) break;
  }
  res.x = best;
  res.fx = fbest;
  res.converged = true;  // bracket exhausted: best achievable in doubles
  return res;
}

// ---------------------------------------------------------------------------
// Deterministic RNG wrapper (fixed seeds keep traces reproducible).

struct Rng {
  std::mt19937_64 eng;

  explicit Rng(std::uint64_t seed = 0x5eed) : eng(seed) {}

  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(eng);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(eng);
  }
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(eng);
  }
  Vec normal_vec(std::size_t d, double stddev = 1.0) {
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = normal(0.0, stddev);
    return v;
  }
  Vec uniform_vec(std::size_t d, double a, double b) {
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = uniform(a, b);
    return v;
  }
};

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// |x|^e * sign(x); continuous at 0 for e > 0.
inline double signed_pow(double x, double e) {
  if (x == 0.0) return 0.0;
  return std::copysign(std::pow(std::fabs(x), e), x);
}

}  // namespace hybridep
