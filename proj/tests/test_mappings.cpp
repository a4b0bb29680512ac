#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hybridep/mappings.hpp"
#include "oracles.hpp"

using namespace hybridep;

namespace {

bool close_vec(const Vec& a, const Vec& b, double tol = 1e-10) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::fabs(a[i] - b[i]) > tol * (1.0 + std::fabs(b[i]))) return false;
  return true;
}

}  // namespace

TEST_CASE("apply: pinned values") {
  auto eu = SpaceGeometry::euclidean(2);

  auto id = Mapping::identity(2);
  CHECK(apply(eu, id, Vec{1.0, 2.0}) == Vec{1.0, 2.0});

  auto span_e1 = ConvexSet::affine_subspace(2, {Vec{1.0, 0.0}});
  auto proj = Mapping::projection_onto(span_e1);
  CHECK(close_vec(apply(eu, proj, Vec{1.0, 1.0}), Vec{1.0, 0.0}));

  auto half = Mapping::averaged(0.5, proj);
  CHECK(close_vec(apply(eu, half, Vec{1.0, 1.0}), Vec{1.0, 0.5}));

  Mat A(2, 2, {0.5, 0.0, 0.0, 0.5});
  auto contr = Mapping::affine_contraction(A);
  CHECK(close_vec(apply(eu, contr, Vec{2.0, -4.0}), Vec{1.0, -2.0}));

  CHECK_THROWS_AS(apply(eu, id, Vec{1.0}), DimensionError);
  CHECK_THROWS_AS(apply(eu, Mapping::identity(3), Vec{1.0, 2.0}),
                  DimensionError);
}

TEST_CASE("mapping constructors validate their inputs") {
  CHECK_THROWS_AS(Mapping::averaged(0.0, Mapping::identity(2)), ConfigError);
  CHECK_THROWS_AS(Mapping::averaged(1.0, Mapping::identity(2)), ConfigError);
  CHECK_THROWS_AS(Mapping::averaged(-0.3, Mapping::identity(2)), ConfigError);
  CHECK_THROWS_AS(Mapping::averaged(1.2, Mapping::identity(2)), ConfigError);
  CHECK_THROWS_AS(Mapping::affine_contraction(Mat(2, 3)), DimensionError);
}

TEST_CASE("affine maps refuse to run outside euclidean geometry") {
  auto sp = SpaceGeometry::lp(2, 3.0);
  auto contr = Mapping::affine_contraction(Mat::identity(2));
  CHECK_THROWS_AS(apply(sp, contr, Vec{1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(
      apply(sp, Mapping::averaged(0.5, Mapping::affine_contraction(
                                           Mat::identity(2))),
            Vec{1.0, 1.0}),
      ConfigError);
  CHECK(contr.euclidean_only());
  CHECK_FALSE(Mapping::identity(2).euclidean_only());
  CHECK_FALSE(
      Mapping::averaged(0.5, Mapping::identity(2)).euclidean_only());
}

TEST_CASE("fixed point sets") {
  auto id = Mapping::identity(2);
  CHECK(fixed_point_set(id).kind() == SetKind::whole_space);

  auto box = ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto proj = Mapping::projection_onto(box);
  auto fps = fixed_point_set(proj);
  CHECK(fps.kind() == SetKind::box);
  CHECK(violation(fps, Vec{0.3, -0.7}) <= 0.0);
  CHECK(violation(fps, Vec{1.5, 0.0}) > 0.4);

  // averaged maps inherit the inner fixed point set
  CHECK(fixed_point_set(Mapping::averaged(0.25, proj)).kind() == SetKind::box);

  // strict contraction: only the origin stays put
  auto contr = Mapping::affine_contraction(Mat(2, 2, {0.5, 0.0, 0.0, 0.5}));
  auto fps0 = fixed_point_set(contr);
  CHECK(fps0.kind() == SetKind::affine);
  CHECK(violation(fps0, Vec{0.0, 0.0}) <= 1e-12);
  CHECK(violation(fps0, Vec{0.1, 0.0}) > 0.05);

  // averaging matrix: fixed points are the diagonal span{(1,1)}
  auto avgmat =
      Mapping::affine_contraction(Mat(2, 2, {0.5, 0.5, 0.5, 0.5}));
  auto fpsd = fixed_point_set(avgmat);
  CHECK(fpsd.kind() == SetKind::affine);
  CHECK(violation(fpsd, Vec{2.0, 2.0}) <= 1e-9);
  CHECK(violation(fpsd, Vec{1.0, -1.0}) > 1.0);
}

TEST_CASE("sampled fixed points really are fixed") {
  Rng rng(51);
  auto eu = SpaceGeometry::euclidean(2);
  auto sp3 = SpaceGeometry::lp(2, 3.0);
  auto box = ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});

  std::vector<Mapping> euclid_maps{
      Mapping::identity(2),
      Mapping::projection_onto(box),
      Mapping::averaged(0.3, Mapping::projection_onto(box)),
      Mapping::affine_contraction(Mat(2, 2, {0.5, 0.5, 0.5, 0.5})),
  };
  for (const auto& S : euclid_maps) {
    auto fps = fixed_point_set(S);
    for (int k = 0; k < 25; ++k) {
      Vec u = sample_point(fps, rng);
      CHECK(close_vec(apply(eu, S, u), u, 1e-9));
    }
  }

  std::vector<Mapping> pnorm_maps{
      Mapping::identity(2),
      Mapping::projection_onto(box),
      Mapping::averaged(0.4, Mapping::projection_onto(box)),
  };
  for (const auto& S : pnorm_maps) {
    auto fps = fixed_point_set(S);
    for (int k = 0; k < 15; ++k) {
      Vec u = sample_point(fps, rng);
      CHECK(close_vec(apply(sp3, S, u), u, 1e-8));
    }
  }
}

TEST_CASE("relative nonexpansiveness checker") {
  auto eu = SpaceGeometry::euclidean(2);
  auto sp3 = SpaceGeometry::lp(2, 3.0);
  auto box = ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto region = ConvexSet::box(Vec{-3.0, -3.0}, Vec{3.0, 3.0});

  auto rep_id = check_relatively_nonexpansive(eu, Mapping::identity(2), region);
  CHECK(rep_id.ok);
  CHECK(rep_id.worst_margin == 0.0);

  auto rep_pe =
      check_relatively_nonexpansive(eu, Mapping::projection_onto(box), region);
  CHECK(rep_pe.ok);

  auto rep_pp = check_relatively_nonexpansive(
      sp3, Mapping::projection_onto(box), region, 200, 1e-7);
  CHECK(rep_pp.ok);

  auto rep_av = check_relatively_nonexpansive(
      sp3, Mapping::averaged(0.3, Mapping::projection_onto(box)), region, 200,
      1e-7);
  CHECK(rep_av.ok);

  // expansion along e1 (spectral radius 2) must be flagged
  auto bad = Mapping::affine_contraction(Mat(2, 2, {2.0, 0.0, 0.0, 1.0}));
  auto rep_bad = check_relatively_nonexpansive(eu, bad, region);
  CHECK_FALSE(rep_bad.ok);
  CHECK(rep_bad.violations > 0);
  CHECK(rep_bad.worst_margin > 1.0);
}

TEST_CASE("averaged maps shrink the Lyapunov distance in p-norm spaces") {
  // direct check of phi(u, Sx) <= phi(u, x) for the dual-coordinate average,
  // with u a fixed point and S built over a generalized projection
  Rng rng(52);
  auto sp = SpaceGeometry::lp(3, 2.5);
  auto ball = ConvexSet::ball(Vec{0.0, 0.0, 0.0}, 1.0);
  auto S = Mapping::averaged(0.6, Mapping::projection_onto(ball));
  for (int k = 0; k < 60; ++k) {
    Vec x = rng.normal_vec(3, 2.0);
    Vec u = sample_point(ball, rng);
    Vec sx = apply(sp, S, x);
    double lhs = lyapunov(sp, u, sx);
    double rhs = lyapunov(sp, u, x);
    CHECK(lhs <= rhs + 1e-8 * (1.0 + rhs));
  }
}
