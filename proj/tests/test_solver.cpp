#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hybridep/solver.hpp"

using namespace hybridep;
using Catch::Matchers::ContainsSubstring;

namespace {

bool close(double a, double b, double tol = 1e-10) {
  return std::fabs(a - b) <= tol * (1.0 + std::fabs(a) + std::fabs(b));
}

bool close_vec(const Vec& a, const Vec& b, double tol = 1e-10) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], tol)) return false;
  return true;
}

// half of x + half of the projection onto span{e1}: F(S) = span{e1}
Mapping halve_toward_axis() {
  auto line = ConvexSet::affine_subspace(2, {Vec{1.0, 0.0}});
  return Mapping::averaged(0.5, Mapping::projection_onto(line));
}

Problem plane_vi_problem() {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::whole(2),
               Bifunction::vi(Mat::identity(2), Vec(2)),
               Mapping::identity(2),
               {Vec{0.0, 0.0}},
               Vec{0.0, 0.0}};
  return prob;
}

}  // namespace

TEST_CASE("parameter sequences: values and analytic summaries") {
  auto c = Sequence::constant(0.5);
  CHECK(c.value(0) == 0.5);
  CHECK(c.value(1234) == 0.5);
  CHECK(c.limit() == 0.5);
  CHECK(c.infimum() == 0.5);
  CHECK(c.supremum() == 0.5);
  CHECK(c.is_constant());

  // (n+1)^{-1/2}
  auto p = Sequence::power(0.0, 1.0, 0.5, 1.0);
  CHECK(close(p.value(0), 1.0));
  CHECK(close(p.value(3), 0.5));
  CHECK(p.limit() == 0.0);
  CHECK(p.infimum() == 0.0);
  CHECK(p.supremum() == 1.0);
  CHECK_FALSE(p.is_constant());
  CHECK(p.decay_exponent() == 0.5);

  auto q = one_minus(p);  // 1 - (n+1)^{-1/2}
  CHECK(close(q.value(0), 0.0));
  CHECK(close(q.value(3), 0.5));
  CHECK(q.limit() == 1.0);
  CHECK(q.infimum() == 0.0);
  CHECK(q.supremum() == 1.0);

  CHECK(one_minus(c).value(17) == 0.5);

  CHECK(sequence_within(p, 0.0, 1.0));
  CHECK_FALSE(sequence_within(p, 0.1, 1.0));
  CHECK(sequence_within(Sequence::power(0.2, 0.3, 1.0), 0.2, 0.5));

  CHECK_THROWS_AS(Sequence::power(0.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(Sequence::power(0.0, 1.0, -0.5), ConfigError);
  CHECK_THROWS_AS(Sequence::power(0.0, 1.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(Sequence::constant(1.0 / 0.0), ConfigError);
}

TEST_CASE("parameter sequences: divergence of sum alpha_n * beta_n") {
  auto half = Sequence::constant(0.5);
  CHECK(sum_of_products_diverges(half, one_minus(half)));

  // alpha_n = (n+1)^{-1/2}: sum alpha_n (1 - alpha_n) diverges
  auto root = Sequence::power(0.0, 1.0, 0.5, 1.0);
  CHECK(sum_of_products_diverges(root, one_minus(root)));

  // alpha_n = 1 - (n+2)^{-3/4}, beta_n = 1 - (n+2)^{-1/2}:
  // sum alpha_n(1-alpha_n) = inf but sum (1-alpha_n)(1-beta_n) < inf
  auto a = Sequence::power(1.0, -1.0, 0.75, 2.0);
  auto b = Sequence::power(1.0, -1.0, 0.5, 2.0);
  CHECK(sum_of_products_diverges(a, one_minus(a)));
  CHECK_FALSE(sum_of_products_diverges(one_minus(a), one_minus(b)));

  // a degenerate factor kills the sum
  CHECK_FALSE(sum_of_products_diverges(Sequence::constant(0.0), half));
  CHECK_FALSE(sum_of_products_diverges(Sequence::constant(1.0),
                                       one_minus(Sequence::constant(1.0))));

  // (n+1)^{-1} against a positive constant: harmonic, diverges
  CHECK(sum_of_products_diverges(Sequence::power(0.0, 1.0, 1.0), half));
  // (n+1)^{-1.1}: summable
  CHECK_FALSE(sum_of_products_diverges(Sequence::power(0.0, 1.0, 1.1), half));
}

TEST_CASE("scheme names round-trip") {
  for (SchemeKind k :
       {SchemeKind::hybrid_ishikawa, SchemeKind::hybrid_f_zero,
        SchemeKind::hybrid_alpha_one, SchemeKind::hybrid_s_identity,
        SchemeKind::mann, SchemeKind::ishikawa_plain,
        SchemeKind::nakajo_takahashi, SchemeKind::martinez_yanes_xu,
        SchemeKind::matsushita_takahashi, SchemeKind::tada_takahashi,
        SchemeKind::takahashi_zembayashi}) {
    auto back = scheme_from_name(scheme_name(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK_FALSE(scheme_from_name("no_such_scheme").has_value());
}

TEST_CASE("main scheme: pinned two-step hand computation") {
  auto prob = plane_vi_problem();
  SchemeConfig cfg;
  cfg.x0 = Vec{2.0, 0.0};

  auto s0 = initial_state(prob.space, cfg);
  CHECK(s0.x == cfg.x0);
  CHECK(s0.cut_C.zero_normal());

  auto s1 = hybrid_ishikawa_step(prob.space, prob.C, prob.f, prob.S, cfg, s0);
  CHECK(s1.n == 1);
  CHECK(s1.z == cfg.x0);  // S = I and beta fast path keep z = x exactly
  CHECK(close_vec(s1.u, Vec{1.0, 0.0}, 1e-12));
  CHECK(close_vec(s1.y, Vec{1.5, 0.0}, 1e-12));
  CHECK(close_vec(s1.x, Vec{1.75, 0.0}, 1e-12));
  CHECK(s1.cut_Q.zero_normal());  // first step: anchor cut is the whole space
  CHECK_FALSE(s1.cut_C.zero_normal());

  auto s2 = step(prob.space, prob.C, prob.f, prob.S, cfg, s1);
  CHECK(close_vec(s2.x, Vec{1.53125, 0.0}, 1e-12));  // ratio 7/8 per step
  CHECK_FALSE(s2.cut_Q.zero_normal());
  CHECK(close(s2.diagnostics.res_zu, 0.5 * 1.75, 1e-12));
}

TEST_CASE("main scheme: full run contracts to the equilibrium point") {
  auto prob = plane_vi_problem();
  SchemeConfig cfg;
  cfg.x0 = Vec{2.0, 0.0};

  auto tr = run(prob, cfg, StopRule{1e-8, 5000});
  REQUIRE(tr.reason == TerminationReason::stop_rule);
  CHECK(tr.iterations < 200);
  REQUIRE_FALSE(tr.states.empty());
  CHECK(close_vec(tr.states[0].x, Vec{1.75, 0.0}, 1e-12));
  for (std::size_t i = 1; i < 5; ++i)
    CHECK(close(tr.states[i].x[0] / tr.states[i - 1].x[0], 0.875, 1e-12));

  CHECK(norm(prob.space, tr.final_point) <= 1e-6);
  REQUIRE(tr.distance_to_oracle.has_value());
  CHECK(*tr.distance_to_oracle <= 1e-6);

  CHECK(tr.worst_containment_margin >= -1e-9);
  CHECK(tr.worst_monotonicity_slack <= 1e-8);
  CHECK(tr.worst_boundedness_slack <= 1e-8);
  for (const auto& st : tr.states) CHECK(st.diagnostics.solution_contained);

  CHECK(tr.final_res_S <= 1e-7);
  CHECK(tr.final_res_zx <= 1e-7);
  CHECK(tr.final_res_zu <= 1e-7);
  CHECK(tr.final_res_yz <= 1e-7);
}

TEST_CASE("main scheme: a fixed point stops after one iteration") {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0}),
               Bifunction::zero(2),
               Mapping::identity(2),
               {},
               {}};
  SchemeConfig cfg;
  cfg.x0 = Vec{0.5, 0.0};

  auto tr = run(prob, cfg, StopRule{});
  CHECK(tr.reason == TerminationReason::stop_rule);
  CHECK(tr.iterations == 1);
  CHECK(tr.final_point == cfg.x0);
  CHECK(tr.states[0].cut_C.zero_normal());
  CHECK(tr.states[0].diagnostics.phi_step == 0.0);
  CHECK(tr.final_res_S == 0.0);
  CHECK(tr.final_res_zu == 0.0);
}

TEST_CASE("beta pinned to one degenerates z_n to x_n exactly") {
  auto prob = plane_vi_problem();
  SchemeConfig cfg;
  cfg.x0 = Vec{1.0, 0.5};
  cfg.beta = Sequence::constant(1.0);
  prob.S = halve_toward_axis();

  // run() must reject this (liminf beta(1-beta) = 0) ...
  CHECK_THROWS_MATCHES(run(prob, cfg), ConfigError,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("liminf beta_n(1-beta_n)")));

  // ... but the step itself is well defined and takes the exact fast path
  auto s0 = initial_state(prob.space, cfg);
  auto s1 = hybrid_ishikawa_step(prob.space, prob.C, prob.f, prob.S, cfg, s0);
  CHECK(s1.z == s0.x);
}

TEST_CASE("hypothesis validation: acceptance and rejection") {
  auto prob = plane_vi_problem();
  prob.S = halve_toward_axis();
  SchemeConfig cfg;
  cfg.x0 = Vec{1.0, 1.0};

  SECTION("the default main-scheme configuration passes") {
    auto rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    CHECK(rep.warnings.empty());
  }
  SECTION("alpha above its declared ceiling") {
    cfg.alpha = Sequence::constant(0.9);
    cfg.alpha_ceiling = 0.8;
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("alpha_n <= b"));
  }
  SECTION("alpha floor must be positive") {
    cfg.alpha_floor = 0.0;
    cfg.alpha = Sequence::constant(0.5);
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("0 < a <= alpha_n"));
  }
  SECTION("alpha touching one is allowed but flagged") {
    cfg.alpha = Sequence::constant(1.0);
    auto rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    REQUIRE_FALSE(rep.warnings.empty());
    CHECK_THAT(rep.warnings.front(), ContainsSubstring("alpha_n <= b < 1"));
  }
  SECTION("resolvent parameters must stay away from zero") {
    cfg.r = Sequence::power(0.0, 1.0, 1.0);  // r_n = (n+1)^{-1} -> 0
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("liminf r_n"));
  }
  SECTION("x0 outside C only warns") {
    prob.C = ConvexSet::box(Vec{-0.5, -0.5}, Vec{0.5, 0.5});
    auto rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    REQUIRE_FALSE(rep.warnings.empty());
    CHECK_THAT(rep.warnings.front(), ContainsSubstring("outside C"));
  }
  SECTION("dimension mismatch is fatal") {
    cfg.x0 = Vec{1.0, 1.0, 1.0};
    auto rep = validate_config(prob, cfg);
    CHECK_FALSE(rep.ok());
  }
  SECTION("Hilbert-only schemes reject p != 2 geometries") {
    prob.space = SpaceGeometry::lp(2, 3.0);
    prob.S = Mapping::identity(2);
    cfg.scheme = SchemeKind::mann;
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("Hilbert"));
  }
  SECTION("euclidean-only mappings reject p != 2 geometries") {
    prob.space = SpaceGeometry::lp(2, 3.0);
    Mat A(2, 2);
    A(0, 0) = 0.5;
    A(1, 1) = 0.5;
    prob.S = Mapping::affine_contraction(A);
    cfg.scheme = SchemeKind::takahashi_zembayashi;
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("Hilbert"));
  }
  SECTION("an lp(2) geometry counts as Hilbert") {
    prob.space = SpaceGeometry::lp(2, 2.0);
    cfg.scheme = SchemeKind::mann;
    CHECK(validate_config(prob, cfg).ok());
  }
}

TEST_CASE("hypothesis validation: predecessor schemes") {
  auto prob = plane_vi_problem();
  prob.S = halve_toward_axis();
  SchemeConfig cfg;
  cfg.x0 = Vec{1.0, 1.0};

  SECTION("mann needs a divergent sum alpha_n(1-alpha_n)") {
    cfg.scheme = SchemeKind::mann;
    CHECK(validate_config(prob, cfg).ok());
    cfg.alpha = Sequence::constant(1.0);
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(),
               ContainsSubstring("sum alpha_n(1-alpha_n)"));
    cfg.alpha = Sequence::power(1.0, -1.0, 0.5, 2.0);
    CHECK(validate_config(prob, cfg).ok());
  }
  SECTION("plain ishikawa needs beta_n <= alpha_n and the two sum conditions") {
    cfg.scheme = SchemeKind::ishikawa_plain;
    cfg.alpha = Sequence::power(1.0, -1.0, 0.75, 2.0);
    cfg.beta = Sequence::power(1.0, -1.0, 0.5, 2.0);
    CHECK(validate_config(prob, cfg).ok());

    std::swap(cfg.alpha, cfg.beta);  // now beta_n > alpha_n
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("beta_n <= alpha_n"));

    cfg.alpha = Sequence::constant(0.5);
    cfg.beta = Sequence::constant(0.25);
    rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());  // sum (1-alpha)(1-beta) diverges
    CHECK_THAT(rep.joined_errors(),
               ContainsSubstring("(1-alpha_n)(1-beta_n)"));
  }
  SECTION("the anchored predecessors bound alpha away from one") {
    for (SchemeKind k :
         {SchemeKind::nakajo_takahashi, SchemeKind::martinez_yanes_xu,
          SchemeKind::matsushita_takahashi}) {
      cfg.scheme = k;
      cfg.alpha = Sequence::constant(0.5);
      cfg.beta = Sequence::power(1.0, -1.0, 1.0);  // lim = 1 (for myx)
      CHECK(validate_config(prob, cfg).ok());
      cfg.alpha = Sequence::constant(1.0);
      CHECK_FALSE(validate_config(prob, cfg).ok());
    }
  }
  SECTION("martinez-yanes-xu needs beta_n -> 1") {
    cfg.scheme = SchemeKind::martinez_yanes_xu;
    cfg.beta = Sequence::constant(0.9);
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(), ContainsSubstring("lim beta_n = 1"));
  }
  SECTION("tada-takahashi keeps alpha inside (0,1)") {
    cfg.scheme = SchemeKind::tada_takahashi;
    CHECK(validate_config(prob, cfg).ok());
    cfg.alpha = Sequence::power(0.5, 0.5, 1.0);  // value(0) = 1
    CHECK_FALSE(validate_config(prob, cfg).ok());
  }
  SECTION("takahashi-zembayashi needs liminf alpha(1-alpha) > 0") {
    cfg.scheme = SchemeKind::takahashi_zembayashi;
    CHECK(validate_config(prob, cfg).ok());
    cfg.alpha = Sequence::constant(1.0);
    auto rep = validate_config(prob, cfg);
    REQUIRE_FALSE(rep.ok());
    CHECK_THAT(rep.joined_errors(),
               ContainsSubstring("liminf alpha_n(1-alpha_n)"));
  }
  SECTION("dedicated specializations flag ignored data") {
    cfg.scheme = SchemeKind::hybrid_f_zero;
    cfg.r = Sequence::constant(2.0);
    auto rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    REQUIRE(rep.warnings.size() == 2);
    CHECK_THAT(rep.warnings[0], ContainsSubstring("treated as 0"));
    CHECK_THAT(rep.warnings[1], ContainsSubstring("pinned to 1"));

    cfg = SchemeConfig{};
    cfg.x0 = Vec{1.0, 1.0};
    cfg.scheme = SchemeKind::hybrid_alpha_one;
    rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    REQUIRE_FALSE(rep.warnings.empty());
    CHECK_THAT(rep.warnings.front(), ContainsSubstring("pinned to 1"));

    cfg.scheme = SchemeKind::hybrid_s_identity;
    rep = validate_config(prob, cfg);
    CHECK(rep.ok());
    REQUIRE_FALSE(rep.warnings.empty());
    CHECK_THAT(rep.warnings.front(), ContainsSubstring("treated as I"));
  }
}

TEST_CASE("mann: pinned midpoint run") {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::whole(2),
               Bifunction::zero(2),
               Mapping::projection_onto(
                   ConvexSet::affine_subspace(2, {Vec{1.0, 0.0}})),
               {},
               Vec{1.0, 0.0}};
  SchemeConfig cfg;
  cfg.scheme = SchemeKind::mann;
  cfg.x0 = Vec{1.0, 1.0};

  auto s1 = step(prob.space, prob.C, prob.f, prob.S, cfg,
                 initial_state(prob.space, cfg));
  CHECK(close_vec(s1.x, Vec{1.0, 0.5}, 1e-15));
  CHECK(s1.z == cfg.x0);  // baselines expose x_n through z/u
  CHECK(s1.cut_C.zero_normal());
  CHECK(s1.cut_Q.zero_normal());

  auto tr = run(prob, cfg, StopRule{1e-8, 100});
  CHECK(tr.reason == TerminationReason::stop_rule);
  CHECK(tr.iterations < 40);
  CHECK(close_vec(tr.final_point, Vec{1.0, 0.0}, 1e-6));
  CHECK(tr.final_res_S <= 1e-7);
}

TEST_CASE("nakajo-takahashi: pinned first cut and limit") {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::whole(2),
               Bifunction::zero(2),
               Mapping::projection_onto(
                   ConvexSet::affine_subspace(2, {Vec{1.0, 0.0}})),
               {Vec{1.0, 0.0}},
               Vec{1.0, 0.0}};
  SchemeConfig cfg;
  cfg.scheme = SchemeKind::nakajo_takahashi;
  cfg.x0 = Vec{1.0, 1.0};

  auto s1 = step(prob.space, prob.C, prob.f, prob.S, cfg,
                 initial_state(prob.space, cfg));
  CHECK(close_vec(s1.y, Vec{1.0, 0.5}, 1e-15));
  CHECK(close(s1.cut_C.normal[0], 0.0, 1e-15));
  CHECK(close(s1.cut_C.normal[1], 1.0, 1e-15));
  CHECK(close(s1.cut_C.offset, 0.75, 1e-15));
  CHECK(close_vec(s1.x, Vec{1.0, 0.75}, 1e-12));

  auto tr = run(prob, cfg, StopRule{1e-8, 200});
  CHECK(tr.reason == TerminationReason::stop_rule);
  CHECK(close_vec(tr.final_point, Vec{1.0, 0.0}, 1e-6));
  CHECK(tr.worst_containment_margin >= -1e-9);
  CHECK(tr.worst_monotonicity_slack <= 1e-8);
  CHECK(tr.worst_boundedness_slack <= 1e-8);
}

TEST_CASE(
    "takahashi-zembayashi and tada-takahashi coincide for a zero bifunction") {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::whole(2),
               Bifunction::zero(2),
               halve_toward_axis(),
               {Vec{2.0, 0.0}},
               {}};
  SchemeConfig cfg;
  cfg.x0 = Vec{2.0, 1.0};
  cfg.scheme = SchemeKind::tada_takahashi;
  auto ta = run(prob, cfg, StopRule{1e-10, 60});
  cfg.scheme = SchemeKind::takahashi_zembayashi;
  auto tz = run(prob, cfg, StopRule{1e-10, 60});

  REQUIRE(ta.states.size() == tz.states.size());
  for (std::size_t i = 0; i < ta.states.size(); ++i)
    CHECK(ta.states[i].x == tz.states[i].x);
  CHECK(ta.final_point == tz.final_point);
}

TEST_CASE("corollary rewrites reproduce the dedicated schemes bit for bit") {
  auto check_traces_equal = [](const IterationTrace& a,
                               const IterationTrace& b) {
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) {
      CHECK(a.states[i].x == b.states[i].x);
      CHECK(a.states[i].z == b.states[i].z);
      CHECK(a.states[i].u == b.states[i].u);
      CHECK(a.states[i].y == b.states[i].y);
    }
    CHECK(a.final_point == b.final_point);
    CHECK(a.reason == b.reason);
  };
  StopRule stop{1e-9, 80};

  SECTION("zero bifunction with unit resolvent parameter") {
    Problem prob{SpaceGeometry::euclidean(2),
                 ConvexSet::box(Vec{-2.0, -2.0}, Vec{2.0, 2.0}),
                 Bifunction::vi(Mat::identity(2), Vec{0.3, -0.1}),
                 halve_toward_axis(),
                 {},
                 {}};
    SchemeConfig base;
    base.x0 = Vec{1.5, 1.0};
    base.r = Sequence::constant(2.0);

    SchemeConfig dedicated = base;
    dedicated.scheme = SchemeKind::hybrid_f_zero;
    auto a = run(prob, dedicated, stop);
    auto b = run(corollary_problem(CorollaryKind::f_zero_r_one, prob),
                 corollary_config(CorollaryKind::f_zero_r_one, base), stop);
    check_traces_equal(a, b);
    CHECK(corollary_scheme(CorollaryKind::f_zero_r_one) ==
          SchemeKind::hybrid_f_zero);
  }
  SECTION("alpha pinned to one") {
    Problem prob{SpaceGeometry::lp(2, 3.0),
                 ConvexSet::box(Vec{-2.0, -2.0}, Vec{2.0, 2.0}),
                 Bifunction::vi(Mat::identity(2), Vec(2)),
                 Mapping::identity(2),
                 {},
                 {}};
    SchemeConfig base;
    base.x0 = Vec{1.0, 0.5};
    base.alpha = Sequence::constant(0.7);  // ignored by the specialization

    SchemeConfig dedicated = base;
    dedicated.scheme = SchemeKind::hybrid_alpha_one;
    auto a = run(prob, dedicated, stop);
    auto b = run(corollary_problem(CorollaryKind::alpha_one, prob),
                 corollary_config(CorollaryKind::alpha_one, base), stop);
    check_traces_equal(a, b);
    for (const auto& st : a.states) CHECK(st.y == st.z);
  }
  SECTION("identity mapping") {
    Problem prob{SpaceGeometry::euclidean(2),
                 ConvexSet::box(Vec{-2.0, -2.0}, Vec{2.0, 2.0}),
                 Bifunction::vi(Mat::identity(2), Vec{-1.0, 0.0}),
                 halve_toward_axis(),  // ignored by the specialization
                 {},
                 {}};
    SchemeConfig base;
    base.x0 = Vec{0.2, 0.8};

    SchemeConfig dedicated = base;
    dedicated.scheme = SchemeKind::hybrid_s_identity;
    auto a = run(prob, dedicated, stop);
    auto b = run(corollary_problem(CorollaryKind::s_identity, prob),
                 corollary_config(CorollaryKind::s_identity, base), stop);
    check_traces_equal(a, b);
  }
  SECTION("rewrites refuse non-main-scheme configs") {
    SchemeConfig cfg;
    cfg.scheme = SchemeKind::mann;
    CHECK_THROWS_AS(corollary_config(CorollaryKind::alpha_one, cfg),
                    ConfigError);
  }
}

TEST_CASE("all schemes run a shared Hilbert problem with sound invariants") {
  Mat M(2, 2);
  M(0, 0) = 1.0;
  M(1, 1) = 2.0;
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::box(Vec{-3.0, -3.0}, Vec{3.0, 3.0}),
               Bifunction::vi(M, Vec{-1.0, 0.0}),
               halve_toward_axis(),
               {Vec{1.0, 0.0}},  // solves both the equilibrium and S
               {}};
  SchemeConfig cfg;
  cfg.x0 = Vec{1.5, 1.0};
  StopRule stop{1e-6, 2000};

  auto run_scheme = [&](SchemeKind k) {
    cfg.scheme = k;
    cfg.alpha = Sequence::constant(0.5);
    cfg.beta = Sequence::constant(0.5);
    cfg.r = Sequence::constant(1.0);
    if (k == SchemeKind::ishikawa_plain) {
      cfg.alpha = Sequence::power(1.0, -1.0, 0.75, 2.0);
      cfg.beta = Sequence::power(1.0, -1.0, 0.5, 2.0);
    }
    if (k == SchemeKind::martinez_yanes_xu)
      cfg.beta = Sequence::power(1.0, -1.0, 1.0);
    return run(prob, cfg, stop);
  };

  for (SchemeKind k :
       {SchemeKind::hybrid_ishikawa, SchemeKind::mann,
        SchemeKind::ishikawa_plain, SchemeKind::nakajo_takahashi,
        SchemeKind::martinez_yanes_xu, SchemeKind::matsushita_takahashi,
        SchemeKind::tada_takahashi, SchemeKind::takahashi_zembayashi}) {
    INFO("scheme " << scheme_name(k));
    auto tr = run_scheme(k);
    // every scheme drives x toward the fixed-point line span{e1}
    CHECK(std::fabs(tr.final_point[1]) <= 1e-3);

    bool anchored = k != SchemeKind::mann && k != SchemeKind::ishikawa_plain;
    if (anchored) {
      CHECK(tr.worst_containment_margin >= -1e-9);
      CHECK(tr.worst_monotonicity_slack <= 1e-8);
      CHECK(tr.worst_boundedness_slack <= 1e-8);
      for (const auto& st : tr.states)
        CHECK(st.diagnostics.solution_contained);
    }
    bool solves_equilibrium = k == SchemeKind::hybrid_ishikawa ||
                              k == SchemeKind::tada_takahashi ||
                              k == SchemeKind::takahashi_zembayashi;
    if (solves_equilibrium) {
      // the anchored equilibrium schemes have a sublinear tail here, so the
      // small-step stop rule need not fire; proximity is the real claim
      CHECK(close_vec(tr.final_point, Vec{1.0, 0.0}, 2e-3));
    } else {
      CHECK(tr.reason == TerminationReason::stop_rule);
    }
  }
}

TEST_CASE("martinez-yanes-xu: cut keeps fixed points and run converges") {
  Problem prob{SpaceGeometry::euclidean(2),
               ConvexSet::whole(2),
               Bifunction::zero(2),
               halve_toward_axis(),
               {Vec{0.4, 0.0}},
               Vec{0.4, 0.0}};
  SchemeConfig cfg;
  cfg.scheme = SchemeKind::martinez_yanes_xu;
  cfg.x0 = Vec{0.4, 1.2};
  cfg.beta = Sequence::power(1.0, -1.0, 1.0);

  auto s1 = step(prob.space, prob.C, prob.f, prob.S, cfg,
                 initial_state(prob.space, cfg));
  // beta_0 = 0: z_0 = S x_0 exactly via the dual-combination fast path
  CHECK(s1.z == apply(prob.space, prob.S, cfg.x0));
  // the custom cut must contain the fixed point u* = (0.4, 0)
  CHECK(halfspace_violation(s1.cut_C, Vec{0.4, 0.0}) <= 0.0);

  auto tr = run(prob, cfg, StopRule{1e-8, 500});
  CHECK(tr.reason == TerminationReason::stop_rule);
  CHECK(close_vec(tr.final_point, Vec{0.4, 0.0}, 1e-6));
  CHECK(tr.worst_containment_margin >= -1e-9);
}

TEST_CASE("main scheme in a p-norm geometry keeps its invariants") {
  auto space = SpaceGeometry::lp(2, 3.0);
  Problem prob{space,
               ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0}),
               Bifunction::zero(2),
               Mapping::projection_onto(
                   ConvexSet::box(Vec{-1.0, 0.0}, Vec{1.0, 0.0})),
               {Vec{0.25, 0.0}},
               {}};
  SchemeConfig cfg;
  cfg.x0 = Vec{0.25, 0.9};

  auto tr = run(prob, cfg, StopRule{1e-7, 400});
  CHECK(tr.reason == TerminationReason::stop_rule);
  CHECK(std::fabs(tr.final_point[1]) <= 1e-4);
  CHECK(tr.worst_containment_margin >= -1e-9);
  CHECK(tr.worst_monotonicity_slack <= 1e-8);
  CHECK(tr.worst_boundedness_slack <= 1e-7);
  // near a zero coordinate the p=3 duality map squares the cut signal, so
  // the iteration floors out with a residual well above the step size
  CHECK(tr.final_res_S <= 5e-4);
}
