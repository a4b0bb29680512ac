#pragma once

// Parameter sequences for the iteration schemes. Two families cover every
// hypothesis in the scheme catalog:
//   constant(v)                       value(n) = v
//   power(base, coeff, e, shift)      value(n) = base + coeff * (n+shift)^(-e)
// Both are monotone with an explicit limit, so range bounds, liminf-style
// conditions and the summability of products can be decided analytically
// instead of by sampling.

#include <cmath>
#include <cstddef>
#include <limits>

#include "hybridep/core.hpp"

namespace hybridep {

enum class SequenceKind { constant, power };

class Sequence {
public:
  static Sequence constant(double v) {
    if (!std::isfinite(v)) throw ConfigError("Sequence::constant: finite value required");
    Sequence s;
    s.kind_ = SequenceKind::constant;
    s.base_ = v;
    return s;
  }

  static Sequence power(double base, double coeff, double exponent,
                        double shift = 1.0) {
    if (!std::isfinite(base) || !std::isfinite(coeff))
      throw ConfigError("Sequence::power: finite base and coeff required");
    if (!(exponent > 0.0))
      throw ConfigError("Sequence::power: exponent must be positive");
    if (!(shift > 0.0))
      throw ConfigError("Sequence::power: shift must be positive");
    Sequence s;
    s.kind_ = SequenceKind::power;
    s.base_ = base;
    s.coeff_ = coeff;
    s.exponent_ = exponent;
    s.shift_ = shift;
    return s;
  }

  double value(std::size_t n) const {
    if (is_constant()) return base_;
    return base_ + coeff_ * std::pow(static_cast<double>(n) + shift_, -exponent_);
  }

  // n -> infinity
  double limit() const { return base_; }

  bool is_constant() const {
    return kind_ == SequenceKind::constant || coeff_ == 0.0;
  }

  // monotone families: the range is spanned by value(0) and the limit
  double infimum() const { return std::min(value(0), limit()); }
  double supremum() const { return std::max(value(0), limit()); }

  // order e with |value(n) - limit| ~ n^(-e); +infinity for exact constants
  double decay_exponent() const {
    if (is_constant()) return std::numeric_limits<double>::infinity();
    return exponent_;
  }

  SequenceKind kind() const { return kind_; }
  double base() const { return base_; }
  double coeff() const { return coeff_; }
  double exponent() const { return exponent_; }
  double shift() const { return shift_; }

private:
  Sequence() = default;

  SequenceKind kind_ = SequenceKind::constant;
  double base_ = 0.0;
  double coeff_ = 0.0;
  double exponent_ = 1.0;
  double shift_ = 1.0;
};

// 1 - s_n, within the same closed family
inline Sequence one_minus(const Sequence& s) {
  if (s.kind() == SequenceKind::constant)
    return Sequence::constant(1.0 - s.base());
  return Sequence::power(1.0 - s.base(), -s.coeff(), s.exponent(), s.shift());
}

inline bool sequence_within(const Sequence& s, double lo, double hi,
                            double tol = 1e-12) {
  return s.infimum() >= lo - tol && s.supremum() <= hi + tol;
}

namespace detail {

// decay order of a nonnegative factor toward 0: zero when the limit is
// positive, the power order when the limit is 0, +infinity when the factor
// vanishes identically
inline double zero_decay(const Sequence& s) {
  if (s.limit() > 0.0) return 0.0;
  if (s.is_constant()) return std::numeric_limits<double>::infinity();
  return s.decay_exponent();
}

}  // namespace detail

// Decides whether sum_n a_n * b_n diverges, for nonnegative monotone factors
// from this catalog: terms behave like c * n^-(ea+eb) with c > 0 (or tend to
// a positive limit), so the sum diverges exactly when ea + eb <= 1.
inline bool sum_of_products_diverges(const Sequence& a, const Sequence& b) {
  double e = detail::zero_decay(a) + detail::zero_decay(b);
  if (std::isinf(e)) return false;
  return e <= 1.0;
}

}  // namespace hybridep
