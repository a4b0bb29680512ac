#pragma once

// The iteration engine. The main scheme interleaves a dual-coordinate
// Ishikawa combination with a resolvent evaluation and projects the fixed
// anchor x0 onto the running intersection C /\ C_n /\ Q_n:
//
//   z_n = J^-1(beta_n Jx_n + (1-beta_n) JSx_n)
//   u_n = T_{r_n} z_n
//   y_n = J^-1(alpha_n Jz_n + (1-alpha_n) Ju_n)
//   C_n = {v in C : phi(v, y_n) <= phi(v, x_n)}
//   Q_n = {v in C : <x_n - v, Jx_n - Jx0> <= 0}
//   x_{n+1} = Pi_{C_n /\ Q_n} x0
//
// Three specializations (zero bifunction with unit resolvent parameter,
// alpha pinned to one, identity mapping) exist both as dedicated schemes and
// as config/problem rewrites of the main scheme; the two routes produce
// bit-identical iterates because the degenerate dual combinations and the
// zero-bifunction resolvent collapse through exact fast paths.
//
// Seven predecessor schemes (Mann, plain Ishikawa, and five hybrid-projection
// variants) share the same state, diagnostics and cut machinery.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hybridep/core.hpp"
#include "hybridep/equilibrium.hpp"
#include "hybridep/geometry.hpp"
#include "hybridep/mappings.hpp"
#include "hybridep/sequences.hpp"
#include "hybridep/sets.hpp"

namespace hybridep {

enum class SchemeKind {
  hybrid_ishikawa,
  hybrid_f_zero,
  hybrid_alpha_one,
  hybrid_s_identity,
  mann,
  ishikawa_plain,
  nakajo_takahashi,
  martinez_yanes_xu,
  matsushita_takahashi,
  tada_takahashi,
  takahashi_zembayashi,
};

inline const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::hybrid_ishikawa: return "hybrid_ishikawa";
    case SchemeKind::hybrid_f_zero: return "hybrid_f_zero";
    case SchemeKind::hybrid_alpha_one: return "hybrid_alpha_one";
    case SchemeKind::hybrid_s_identity: return "hybrid_s_identity";
    case SchemeKind::mann: return "mann";
    case SchemeKind::ishikawa_plain: return "ishikawa_plain";
    case SchemeKind::nakajo_takahashi: return "nakajo_takahashi";
    case SchemeKind::martinez_yanes_xu: return "martinez_yanes_xu";
    case SchemeKind::matsushita_takahashi: return "matsushita_takahashi";
    case SchemeKind::tada_takahashi: return "tada_takahashi";
    case SchemeKind::takahashi_zembayashi: return "takahashi_zembayashi";
  }
  return "unknown";
}

inline std::optional<SchemeKind> scheme_from_name(const std::string& name) {
  for (SchemeKind k :
       {SchemeKind::hybrid_ishikawa, SchemeKind::hybrid_f_zero,
        SchemeKind::hybrid_alpha_one, SchemeKind::hybrid_s_identity,
        SchemeKind::mann, SchemeKind::ishikawa_plain,
        SchemeKind::nakajo_takahashi, SchemeKind::martinez_yanes_xu,
        SchemeKind::matsushita_takahashi, SchemeKind::tada_takahashi,
        SchemeKind::takahashi_zembayashi})
    if (name == scheme_name(k)) return k;
  return std::nullopt;
}

inline bool is_hybrid_scheme(SchemeKind k) {
  return k == SchemeKind::hybrid_ishikawa || k == SchemeKind::hybrid_f_zero ||
         k == SchemeKind::hybrid_alpha_one ||
         k == SchemeKind::hybrid_s_identity;
}

inline bool is_baseline_scheme(SchemeKind k) { return !is_hybrid_scheme(k); }

// the five predecessor schemes stated only for Hilbert spaces
inline bool scheme_requires_hilbert(SchemeKind k) {
  return k == SchemeKind::mann || k == SchemeKind::ishikawa_plain ||
         k == SchemeKind::nakajo_takahashi ||
         k == SchemeKind::martinez_yanes_xu ||
         k == SchemeKind::tada_takahashi;
}

inline bool scheme_uses_bifunction(SchemeKind k) {
  return k == SchemeKind::hybrid_ishikawa ||
         k == SchemeKind::hybrid_alpha_one ||
         k == SchemeKind::hybrid_s_identity ||
         k == SchemeKind::tada_takahashi ||
         k == SchemeKind::takahashi_zembayashi;
}

inline bool scheme_uses_mapping(SchemeKind k) {
  return k != SchemeKind::hybrid_s_identity;
}

struct SchemeConfig {
  SchemeKind scheme = SchemeKind::hybrid_ishikawa;
  Sequence alpha = Sequence::constant(0.5);
  Sequence beta = Sequence::constant(0.5);
  Sequence r = Sequence::constant(1.0);
  // declared bounds 0 < a <= alpha_n <= b <= 1 for the main scheme
  double alpha_floor = 0.5;
  double alpha_ceiling = 1.0;
  Vec x0;
  double projection_tol = 1e-10;
  double resolvent_tol = 1e-11;
  int max_resolvent_iterations = 400000;
};

struct Problem {
  SpaceGeometry space = SpaceGeometry::euclidean(1);
  ConvexSet C = ConvexSet::whole(1);
  Bifunction f = Bifunction::zero(1);
  Mapping S = Mapping::identity(1);
  // known members of F(S) /\ EP(f): drive the containment/boundedness checks
  std::vector<Vec> reference_solutions;
  // known value of Pi_{F(S) /\ EP(f)} x0, when a closed form exists
  std::optional<Vec> oracle_limit;
};

// ---------------------------------------------------------------------------
// Hypothesis validation

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }

  std::string joined_errors() const {
    std::string s;
    for (const auto& e : errors) {
      if (!s.empty()) s += "; ";
      s += e;
    }
    return s;
  }
};

namespace detail {

inline void require(ValidationReport& rep, bool cond, const std::string& msg) {
  if (!cond) rep.errors.push_back(msg);
}

}  // namespace detail

inline ValidationReport validate_config(const Problem& problem,
                                        const SchemeConfig& config,
                                        std::size_t horizon = 10000) {
  using detail::require;
  ValidationReport rep;
  const SchemeKind k = config.scheme;
  const std::string name = scheme_name(k);
  const Sequence &a = config.alpha, &b = config.beta, &r = config.r;

  if (config.x0.size() != problem.space.dimension) {
    rep.errors.push_back(name + ": x0 dimension mismatch");
    return rep;
  }
  if (problem.C.dim() != problem.space.dimension ||
      problem.f.dim() != problem.space.dimension ||
      problem.S.dim() != problem.space.dimension) {
    rep.errors.push_back(name + ": problem component dimension mismatch");
    return rep;
  }
  if (scheme_requires_hilbert(k) && !problem.space.hilbert())
    rep.errors.push_back(name + ": requires a Hilbert (p = 2) geometry");
  if (scheme_uses_mapping(k) && problem.S.euclidean_only() &&
      !problem.space.hilbert())
    rep.errors.push_back(name +
                         ": the mapping catalog entry needs a Hilbert space");
  if (violation(problem.C, config.x0) > 1e-9)
    rep.warnings.push_back(name + ": x0 lies outside C");

  auto require_alpha_band = [&] {
    require(rep, config.alpha_floor > 0.0,
            name + ": declared lower bound a > 0 required (0 < a <= alpha_n)");
    require(rep, a.infimum() >= config.alpha_floor - 1e-12,
            name + ": alpha_n >= a required");
    require(rep, config.alpha_ceiling <= 1.0 + 1e-12,
            name + ": declared upper bound b <= 1 required");
    require(rep, a.supremum() <= config.alpha_ceiling + 1e-12,
            name + ": alpha_n <= b required");
    if (a.supremum() > 1.0 - 1e-12)
      rep.warnings.push_back(
          name +
          ": alpha_n reaches 1; the convergence estimate assumes alpha_n <= "
          "b < 1");
  };
  auto require_beta_window = [&] {
    require(rep, sequence_within(b, 0.0, 1.0),
            name + ": beta_n in [0,1] required");
    require(rep, b.limit() > 0.0 && b.limit() < 1.0,
            name + ": liminf beta_n(1-beta_n) > 0 required");
  };
  auto require_r_liminf = [&] {
    require(rep, r.infimum() > 0.0, name + ": r_n > 0 required");
    require(rep, r.limit() > 0.0, name + ": liminf r_n > 0 required");
  };

  switch (k) {
    case SchemeKind::hybrid_ishikawa:
      require_alpha_band();
      require_beta_window();
      require_r_liminf();
      break;
    case SchemeKind::hybrid_f_zero:
      require_alpha_band();
      require_beta_window();
      if (problem.f.kind() != BifunctionKind::zero)
        rep.warnings.push_back(name + ": bifunction ignored (treated as 0)");
      if (!(r.is_constant() && r.limit() == 1.0))
        rep.warnings.push_back(name + ": r_n ignored (pinned to 1)");
      break;
    case SchemeKind::hybrid_alpha_one:
      require_beta_window();
      require_r_liminf();
      if (!(a.is_constant() && a.limit() == 1.0))
        rep.warnings.push_back(name + ": alpha_n ignored (pinned to 1)");
      break;
    case SchemeKind::hybrid_s_identity:
      require_alpha_band();
      require_beta_window();
      require_r_liminf();
      if (problem.S.kind() != MappingKind::identity)
        rep.warnings.push_back(name + ": mapping ignored (treated as I)");
      break;
    case SchemeKind::mann:
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, sum_of_products_diverges(a, one_minus(a)),
              name + ": sum alpha_n(1-alpha_n) = infinity required");
      break;
    case SchemeKind::ishikawa_plain: {
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, sequence_within(b, 0.0, 1.0),
              name + ": beta_n in [0,1] required");
      bool dominated = b.limit() <= a.limit() + 1e-12;
      for (std::size_t n = 0; dominated && n <= horizon; ++n)
        dominated = b.value(n) <= a.value(n) + 1e-12;
      require(rep, dominated, name + ": beta_n <= alpha_n required");
      require(rep, sum_of_products_diverges(a, one_minus(a)),
              name + ": sum alpha_n(1-alpha_n) = infinity required");
      require(rep, !sum_of_products_diverges(one_minus(a), one_minus(b)),
              name + ": sum (1-alpha_n)(1-beta_n) < infinity required");
      require(rep, b.limit() > 0.0, name + ": liminf beta_n > 0 required");
      break;
    }
    case SchemeKind::nakajo_takahashi:
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, a.supremum() < 1.0, name + ": sup alpha_n < 1 required");
      break;
    case SchemeKind::martinez_yanes_xu:
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, sequence_within(b, 0.0, 1.0),
              name + ": beta_n in [0,1] required");
      require(rep, a.supremum() < 1.0, name + ": sup alpha_n < 1 required");
      require(rep, b.limit() == 1.0, name + ": lim beta_n = 1 required");
      break;
    case SchemeKind::matsushita_takahashi:
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, a.limit() < 1.0, name + ": limsup alpha_n < 1 required");
      break;
    case SchemeKind::tada_takahashi:
      require(rep, a.infimum() > 0.0 && a.supremum() < 1.0,
              name + ": alpha_n in [a,b] within (0,1) required");
      require_r_liminf();
      break;
    case SchemeKind::takahashi_zembayashi:
      require(rep, sequence_within(a, 0.0, 1.0),
              name + ": alpha_n in [0,1] required");
      require(rep, a.limit() > 0.0 && a.limit() < 1.0,
              name + ": liminf alpha_n(1-alpha_n) > 0 required");
      require(rep, r.infimum() > 0.0,
              name + ": r_n in [a, infinity) with a > 0 required");
      break;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Iteration state

struct DiagnosticsRecord {
  double phi_anchor = 0.0;  // phi(x_{n+1}, x0)
  double phi_step = 0.0;    // phi(x_{n+1}, x_n)
  double res_S = 0.0;       // |x_n - S x_n|
  double res_zx = 0.0;      // |z_n - x_n|
  double res_zu = 0.0;      // |z_n - u_n|
  double res_xy = 0.0;      // |x_n - y_n|
  bool solution_contained = true;
  double containment_margin = 0.0;  // most negative reference margin
};

struct IterationState {
  std::size_t n = 0;
  Vec x, z, u, y;
  HalfSpace cut_C, cut_Q;
  DiagnosticsRecord diagnostics;
};

inline IterationState initial_state(const SpaceGeometry& space,
                                    const SchemeConfig& config) {
  check_dim(space, config.x0.size(), "initial_state");
  IterationState s;
  s.x = s.z = s.u = s.y = config.x0;
  s.cut_C = HalfSpace{DualVec(space.dimension), 0.0};
  s.cut_Q = s.cut_C;
  return s;
}

// thrown by run() when a step fails, carrying the failing iteration index
class IterationError : public Error {
public:
  IterationError(std::size_t n, const std::string& what)
      : Error("iteration " + std::to_string(n) + ": " + what), n_(n) {}
  std::size_t iteration() const { return n_; }

private:
  std::size_t n_;
};

namespace detail {

struct StepQuantities {
  Vec Sx, z, u, y;
  double alpha = 1.0;
};

// z_n, u_n, y_n for the four hybrid variants; the specializations bypass the
// generic formulas exactly rather than through near-1 parameters
inline StepQuantities hybrid_quantities(const SpaceGeometry& space,
                                        const ConvexSet& C,
                                        const Bifunction& f, const Mapping& S,
                                        const SchemeConfig& config,
                                        std::size_t n, const Vec& xn) {
  StepQuantities q;
  const bool s_ident = config.scheme == SchemeKind::hybrid_s_identity;
  const bool f_zero = config.scheme == SchemeKind::hybrid_f_zero;
  const bool a_one = config.scheme == SchemeKind::hybrid_alpha_one;
  q.Sx = s_ident ? xn : apply(space, S, xn, config.projection_tol);
  q.z = dual_combine(space, config.beta.value(n), xn, q.Sx);
  ResolventParams prm{f_zero ? 1.0 : config.r.value(n), config.resolvent_tol,
                      config.max_resolvent_iterations};
  q.u = f_zero
            ? resolvent(space, C, Bifunction::zero(space.dimension), prm, q.z)
            : resolvent(space, C, f, prm, q.z);
  q.alpha = a_one ? 1.0 : config.alpha.value(n);
  q.y = a_one ? q.z : dual_combine(space, q.alpha, q.z, q.u);
  return q;
}

inline DiagnosticsRecord make_diagnostics(const SpaceGeometry& space,
                                          const SchemeConfig& config,
                                          const Vec& xn, const Vec& Sx,
                                          const Vec& z, const Vec& u,
                                          const Vec& y, const Vec& xnext) {
  DiagnosticsRecord d;
  d.phi_anchor = lyapunov(space, xnext, config.x0);
  d.phi_step = lyapunov(space, xnext, xn);
  d.res_S = norm(space, xn - Sx);
  d.res_zx = norm(space, z - xn);
  d.res_zu = norm(space, z - u);
  d.res_xy = norm(space, xn - y);
  return d;
}

}  // namespace detail

// One step of the main scheme or of one of its three dedicated
// specializations (selected by config.scheme).
inline IterationState hybrid_ishikawa_step(const SpaceGeometry& space,
                                           const ConvexSet& C,
                                           const Bifunction& f,
                                           const Mapping& S,
                                           const SchemeConfig& config,
                                           const IterationState& state) {
  if (!is_hybrid_scheme(config.scheme))
    throw ConfigError("hybrid_ishikawa_step: config selects a baseline scheme");
  const Vec& xn = state.x;
  auto q = detail::hybrid_quantities(space, C, f, S, config, state.n, xn);

  IterationState next;
  next.n = state.n + 1;
  next.cut_C = cut_from_lyapunov_comparison(space, q.y, xn);
  next.cut_Q = cut_from_anchor(space, xn, config.x0);
  next.x = project_onto_cuts(space, C, {next.cut_C, next.cut_Q}, config.x0,
                             config.projection_tol)
               .point;
  next.z = q.z;
  next.u = q.u;
  next.y = q.y;
  next.diagnostics =
      detail::make_diagnostics(space, config, xn, q.Sx, q.z, q.u, q.y, next.x);
  return next;
}

// One step of a predecessor scheme.
inline IterationState baseline_step(SchemeKind scheme,
                                    const SpaceGeometry& space,
                                    const ConvexSet& C, const Bifunction& f,
                                    const Mapping& S,
                                    const SchemeConfig& config,
                                    const IterationState& state) {
  if (!is_baseline_scheme(scheme))
    throw ConfigError("baseline_step: use hybrid_ishikawa_step");
  const std::size_t n = state.n;
  const Vec& xn = state.x;
  const double alpha = config.alpha.value(n);
  const double beta = config.beta.value(n);
  const Vec Sx = apply(space, S, xn, config.projection_tol);

  IterationState next;
  next.n = n + 1;
  next.z = next.u = next.y = xn;
  next.cut_C = HalfSpace{DualVec(space.dimension), 0.0};
  next.cut_Q = next.cut_C;

  auto project_cuts = [&](const HalfSpace& cut) {
    next.cut_C = cut;
    next.cut_Q = cut_from_anchor(space, xn, config.x0);
    next.x = project_onto_cuts(space, C, {next.cut_C, next.cut_Q}, config.x0,
                               config.projection_tol)
                 .point;
  };

  switch (scheme) {
    case SchemeKind::mann:
      next.x = dual_combine(space, alpha, xn, Sx);
      break;
    case SchemeKind::ishikawa_plain: {
      next.y = dual_combine(space, beta, xn, Sx);
      Vec Sy = apply(space, S, next.y, config.projection_tol);
      next.x = dual_combine(space, alpha, xn, Sy);
      break;
    }
    case SchemeKind::nakajo_takahashi: {
      next.y = dual_combine(space, alpha, xn, Sx);
      project_cuts(cut_from_lyapunov_comparison(space, next.y, xn));
      break;
    }
    case SchemeKind::martinez_yanes_xu: {
      next.z = dual_combine(space, beta, xn, Sx);
      Vec Sz = apply(space, S, next.z, config.projection_tol);
      next.y = dual_combine(space, alpha, xn, Sz);
      double nx = norm(space, xn), ny = norm(space, next.y),
             nz = norm(space, next.z);
      Vec a = 2.0 * (xn - next.y - (1.0 - alpha) * (xn - next.z));
      double off =
          nx * nx - ny * ny + (1.0 - alpha) * (nz * nz - nx * nx);
      project_cuts(HalfSpace{as_dual(a), off});
      break;
    }
    case SchemeKind::matsushita_takahashi: {
      next.y = dual_combine(space, alpha, xn, Sx);
      project_cuts(cut_from_lyapunov_comparison(space, next.y, xn));
      break;
    }
    case SchemeKind::tada_takahashi: {
      ResolventParams prm{config.r.value(n), config.resolvent_tol,
                          config.max_resolvent_iterations};
      next.u = resolvent(space, C, f, prm, xn);
      Vec Su = apply(space, S, next.u, config.projection_tol);
      next.y = dual_combine(space, alpha, xn, Su);
      project_cuts(cut_from_lyapunov_comparison(space, next.y, xn));
      break;
    }
    case SchemeKind::takahashi_zembayashi: {
      next.y = dual_combine(space, alpha, xn, Sx);
      ResolventParams prm{config.r.value(n), config.resolvent_tol,
                          config.max_resolvent_iterations};
      next.u = resolvent(space, C, f, prm, next.y);
      project_cuts(cut_from_lyapunov_comparison(space, next.u, xn));
      break;
    }
    default:
      throw ConfigError("baseline_step: unreachable");
  }
  next.diagnostics = detail::make_diagnostics(space, config, xn, Sx, next.z,
                                              next.u, next.y, next.x);
  return next;
}

inline IterationState step(const SpaceGeometry& space, const ConvexSet& C,
                           const Bifunction& f, const Mapping& S,
                           const SchemeConfig& config,
                           const IterationState& state) {
  if (is_hybrid_scheme(config.scheme))
    return hybrid_ishikawa_step(space, C, f, S, config, state);
  return baseline_step(config.scheme, space, C, f, S, config, state);
}

// ---------------------------------------------------------------------------
// Corollary rewrites: a specialized main-scheme run must coincide with the
// dedicated specialized scheme, so the rewrite pins the corresponding data.

enum class CorollaryKind { f_zero_r_one, alpha_one, s_identity };

inline SchemeConfig corollary_config(CorollaryKind kind, SchemeConfig base) {
  if (base.scheme != SchemeKind::hybrid_ishikawa)
    throw ConfigError("corollary_config: expects the main scheme");
  switch (kind) {
    case CorollaryKind::f_zero_r_one:
      base.r = Sequence::constant(1.0);
      break;
    case CorollaryKind::alpha_one:
      base.alpha = Sequence::constant(1.0);
      base.alpha_floor = 1.0;
      base.alpha_ceiling = 1.0;
      break;
    case CorollaryKind::s_identity:
      break;
  }
  return base;
}

inline Problem corollary_problem(CorollaryKind kind, Problem base) {
  switch (kind) {
    case CorollaryKind::f_zero_r_one:
      base.f = Bifunction::zero(base.space.dimension);
      break;
    case CorollaryKind::alpha_one:
      break;
    case CorollaryKind::s_identity:
      base.S = Mapping::identity(base.space.dimension);
      break;
  }
  return base;
}

inline SchemeKind corollary_scheme(CorollaryKind kind) {
  switch (kind) {
    case CorollaryKind::f_zero_r_one: return SchemeKind::hybrid_f_zero;
    case CorollaryKind::alpha_one: return SchemeKind::hybrid_alpha_one;
    case CorollaryKind::s_identity: return SchemeKind::hybrid_s_identity;
  }
  return SchemeKind::hybrid_ishikawa;
}

// ---------------------------------------------------------------------------
// Full runs

enum class TerminationReason { stop_rule, iteration_cap };

inline const char* termination_name(TerminationReason r) {
  return r == TerminationReason::stop_rule ? "stop_rule" : "iteration_cap";
}

struct StopRule {
  double eps_stop = 1e-8;
  int max_iterations = 10000;
};

struct IterationTrace {
  std::vector<IterationState> states;  // the produced iterates 1..N
  TerminationReason reason = TerminationReason::iteration_cap;
  Vec final_point;
  std::size_t iterations = 0;

  // residuals recomputed at the final point
  double final_res_S = 0.0;
  double final_res_zx = 0.0;
  double final_res_zu = 0.0;
  double final_res_yz = 0.0;

  // worst invariant margins over the run
  double worst_containment_margin = 0.0;   // expected >= -1e-9
  double worst_monotonicity_slack = 0.0;   // expected <= 1e-8
  double worst_boundedness_slack = 0.0;    // expected <= 1e-8
  std::optional<double> distance_to_oracle;
};

namespace detail {

// margin of a reference point against C /\ C_n /\ Q_n (negative = violated)
inline double reference_margin(const ConvexSet& C, const HalfSpace& cut_C,
                               const HalfSpace& cut_Q, const Vec& ustar) {
  double v = violation(C, ustar);
  v = std::max(v, halfspace_violation(cut_C, ustar));
  v = std::max(v, halfspace_violation(cut_Q, ustar));
  return -v;
}

// z/u/y residuals recomputed at a point, without advancing the iterate
inline void terminal_residuals(const Problem& problem,
                               const SchemeConfig& config, std::size_t n,
                               const Vec& x, IterationTrace& tr) {
  const auto& space = problem.space;
  if (is_hybrid_scheme(config.scheme)) {
    auto q = detail::hybrid_quantities(space, problem.C, problem.f, problem.S,
                                       config, n, x);
    tr.final_res_S = norm(space, x - q.Sx);
    tr.final_res_zx = norm(space, q.z - x);
    tr.final_res_zu = norm(space, q.z - q.u);
    tr.final_res_yz = norm(space, q.y - q.z);
    return;
  }
  Vec Sx = apply(space, problem.S, x, config.projection_tol);
  tr.final_res_S = norm(space, x - Sx);
  tr.final_res_zx = 0.0;
  tr.final_res_zu = 0.0;
  tr.final_res_yz = 0.0;
}

}  // namespace detail

// A finished or failed run; on failure the trace holds every iterate
// produced before the failing step, with its invariant margins intact.
struct RunOutcome {
  IterationTrace trace;
  bool failed = false;
  std::string error_message;
  std::size_t failed_iteration = 0;
};

inline RunOutcome run_guarded(const Problem& problem,
                              const SchemeConfig& config,
                              const StopRule& stop = {}) {
  auto rep = validate_config(problem, config,
                             static_cast<std::size_t>(stop.max_iterations));
  if (!rep.ok())
    throw ConfigError("run: invalid configuration: " + rep.joined_errors());

  const auto& space = problem.space;
  RunOutcome out;
  IterationTrace& tr = out.trace;
  IterationState state = initial_state(space, config);
  double prev_phi_anchor = 0.0;
  std::vector<double> ref_phi;
  ref_phi.reserve(problem.reference_solutions.size());
  for (const Vec& u : problem.reference_solutions)
    ref_phi.push_back(lyapunov(space, u, config.x0));

  tr.reason = TerminationReason::iteration_cap;
  for (int it = 0; it < stop.max_iterations; ++it) {
    IterationState next;
    try {
      next = step(space, problem.C, problem.f, problem.S, config, state);
    } catch (const Error& e) {
      out.failed = true;
      out.error_message = e.what();
      out.failed_iteration = state.n;
      break;
    }

    auto& d = next.diagnostics;
    for (std::size_t i = 0; i < problem.reference_solutions.size(); ++i) {
      double m = detail::reference_margin(problem.C, next.cut_C, next.cut_Q,
                                          problem.reference_solutions[i]);
      d.containment_margin = std::min(d.containment_margin, m);
      if (m < -1e-9) d.solution_contained = false;
      tr.worst_boundedness_slack =
          std::max(tr.worst_boundedness_slack, d.phi_anchor - ref_phi[i]);
    }
    tr.worst_containment_margin =
        std::min(tr.worst_containment_margin, d.containment_margin);
    tr.worst_monotonicity_slack = std::max(
        tr.worst_monotonicity_slack, prev_phi_anchor - d.phi_anchor);
    prev_phi_anchor = d.phi_anchor;

    double move = norm(space, next.x - state.x);
    tr.states.push_back(next);
    state = std::move(next);
    if (move <= stop.eps_stop) {
      tr.reason = TerminationReason::stop_rule;
      break;
    }
  }

  tr.final_point = state.x;
  tr.iterations = state.n;
  try {
    detail::terminal_residuals(problem, config, state.n, state.x, tr);
  } catch (const Error&) {
    // residuals are best-effort on failed runs
    tr.final_res_S = tr.final_res_zx = tr.final_res_zu = tr.final_res_yz =
        std::numeric_limits<double>::quiet_NaN();
  }
  if (problem.oracle_limit)
    tr.distance_to_oracle = norm(space, state.x - *problem.oracle_limit);
  return out;
}

inline IterationTrace run(const Problem& problem, const SchemeConfig& config,
                          const StopRule& stop = {}) {
  RunOutcome out = run_guarded(problem, config, stop);
  if (out.failed)
    throw IterationError(out.failed_iteration, out.error_message);
  return out.trace;
}

}  // namespace hybridep
