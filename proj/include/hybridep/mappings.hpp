#pragma once

// Catalog of relatively nonexpansive self-maps with known fixed-point sets:
//   identity                      F(S) = whole space
//   generalized_projection_onto   F(S) = K (any space)
//   averaged                      dual-coordinate average with an inner map;
//                                 F(S) = F(inner)
//   affine_contraction            x -> Ax, euclidean only; F(S) = null(A - I)
//
// The averaged variant combines in dual coordinates, S = J^{-1}((1-theta) Jx
// + theta J(inner x)), which reduces to the ordinary convex combination in
// euclidean geometry and preserves relative nonexpansiveness for p != 2.

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "hybridep/core.hpp"
#include "hybridep/equilibrium.hpp"
#include "hybridep/geometry.hpp"
#include "hybridep/sets.hpp"

namespace hybridep {

enum class MappingKind {
  identity,
  generalized_projection_onto,
  averaged,
  affine_contraction
};

class Mapping {
public:
  static Mapping identity(std::size_t dim) {
    Mapping m;
    m.kind_ = MappingKind::identity;
    m.dim_ = dim;
    return m;
  }

  static Mapping projection_onto(ConvexSet K) {
    Mapping m;
    m.kind_ = MappingKind::generalized_projection_onto;
    m.dim_ = K.dim();
    m.target_ = std::make_shared<ConvexSet>(std::move(K));
    return m;
  }

  static Mapping averaged(double theta, Mapping inner) {
    if (!(theta > 0.0 && theta < 1.0))
      throw ConfigError("Mapping::averaged: theta must lie in (0,1)");
    Mapping m;
    m.kind_ = MappingKind::averaged;
    m.dim_ = inner.dim();
    m.theta_ = theta;
    m.inner_ = std::make_shared<Mapping>(std::move(inner));
    return m;
  }

  // x -> Ax; the checker, not the constructor, decides whether A behaves.
  static Mapping affine_contraction(Mat A) {
    if (A.rows != A.cols)
      throw DimensionError("Mapping::affine_contraction: A must be square");
    Mapping m;
    m.kind_ = MappingKind::affine_contraction;
    m.dim_ = A.rows;
    m.A_ = std::move(A);
    return m;
  }

  MappingKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const ConvexSet& target() const { return *target_; }
  double theta() const { return theta_; }
  const Mapping& inner() const { return *inner_; }
  const Mat& matrix() const { return A_; }

  bool euclidean_only() const {
    if (kind_ == MappingKind::affine_contraction) return true;
    if (kind_ == MappingKind::averaged) return inner_->euclidean_only();
    return false;
  }

private:
  Mapping() = default;

  MappingKind kind_ = MappingKind::identity;
  std::size_t dim_ = 0;
  std::shared_ptr<const ConvexSet> target_;
  double theta_ = 0.5;
  std::shared_ptr<const Mapping> inner_;
  Mat A_;
};

inline Vec apply(const SpaceGeometry& space, const Mapping& S, const Vec& x,
                 double tol = 1e-10) {
  check_dim(space, x.size(), "apply");
  if (S.dim() != space.dimension)
    throw DimensionError("apply: mapping dimension mismatch");
  switch (S.kind()) {
    case MappingKind::identity:
      return x;
    case MappingKind::generalized_projection_onto:
      return generalized_project(space, S.target(), x, tol).point;
    case MappingKind::averaged: {
      Vec inner = apply(space, S.inner(), x, tol);
      return dual_combine(space, 1.0 - S.theta(), x, inner);
    }
    case MappingKind::affine_contraction:
      if (!space.hilbert())
        throw ConfigError("affine_contraction mappings need a Hilbert space");
      return mul(S.matrix(), x);
  }
  return x;
}

// Exact convex description of F(S), available for every catalog variant.
inline ConvexSet fixed_point_set(const Mapping& S) {
  switch (S.kind()) {
    case MappingKind::identity:
      return ConvexSet::whole(S.dim());
    case MappingKind::generalized_projection_onto:
      return S.target();
    case MappingKind::averaged:
      return fixed_point_set(S.inner());
    case MappingKind::affine_contraction: {
      Mat AmI = S.matrix();
      for (std::size_t i = 0; i < AmI.rows; ++i) AmI(i, i) -= 1.0;
      return ConvexSet::affine_subspace(S.dim(), null_space(AmI));
    }
  }
  return ConvexSet::whole(S.dim());
}

struct NonexpansivenessReport {
  bool ok = true;
  double worst_margin = 0.0;  // max over samples of phi(u,Sx) - phi(u,x)
  int violations = 0;
};

// Samples x (over the given region) and u in F(S), testing the defining
// inequality phi(u, Sx) <= phi(u, x) + tol.
inline NonexpansivenessReport check_relatively_nonexpansive(
    const SpaceGeometry& space, const Mapping& S, const ConvexSet& region,
    int samples = 500, double tol = 1e-9, std::uint64_t seed = 0x5eed) {
  NonexpansivenessReport rep;
  Rng rng(seed);
  ConvexSet fps = fixed_point_set(S);
  for (int k = 0; k < samples; ++k) {
    Vec x = sample_point(region, rng, 2.0);
    Vec u = sample_point(fps, rng, 2.0);
    Vec sx = apply(space, S, x);
    double margin = lyapunov(space, u, sx) - lyapunov(space, u, x);
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > tol) {
      rep.ok = false;
      ++rep.violations;
    }
  }
  return rep;
}

}  // namespace hybridep
