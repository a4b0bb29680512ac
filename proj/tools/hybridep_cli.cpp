// Command-line front end for the hybridep solver library.
//
//   hybridep run <config.json>     execute one experiment, write trace + report
//   hybridep compare <config-dir>  run every *.json spec in the dir, one table
//   hybridep check <config.json>   validate only, print hypotheses verdict
//   hybridep selftest              run the built-in invariant suites
//
// Exit codes: 0 success (for `run`: stop rule fired and all invariant margins
// within tolerance), 1 quality failure (cap hit, margins exceeded, selftest
// failure, runtime error), 2 configuration/usage error.

#include <CLI11.hpp>
#include <hybridep/hybridep.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace hybridep;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitQuality = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  int max_iter = -1;         // -1: keep spec value
  double eps_stop = -1.0;    // <0: keep spec value
  std::string out_dir;       // empty: keep spec value / env / cwd
  unsigned long seed = 2026; // sampled diagnostics (selftest)
};

void apply_overrides(ProblemSpec& spec, const Overrides& ov) {
  if (ov.max_iter >= 0) spec.stop.max_iterations = ov.max_iter;
  if (ov.eps_stop >= 0.0) spec.stop.eps_stop = ov.eps_stop;
  if (!ov.out_dir.empty()) spec.out_dir = ov.out_dir;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_vec(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s + ")";
}

void print_report(const RunReport& r) {
  std::cout << "experiment:        " << r.name << '\n'
            << "scheme:            " << r.scheme << '\n'
            << "termination:       " << r.termination << '\n'
            << "iterations:        " << r.iterations << '\n'
            << "final point:       " << fmt_vec(r.final_point) << '\n'
            << "residual |x-Sx|:   " << fmt(r.final_res_S) << '\n'
            << "residual |z-u|:    " << fmt(r.final_res_zu) << '\n'
            << "containment margin " << fmt(r.worst_containment_margin)
            << '\n'
            << "monotonicity slack " << fmt(r.worst_monotonicity_slack)
            << '\n'
            << "boundedness slack  " << fmt(r.worst_boundedness_slack)
            << '\n';
  if (r.distance_to_oracle)
    std::cout << "distance to oracle " << fmt(*r.distance_to_oracle) << '\n';
  std::cout << "wall seconds:      " << fmt(r.wall_seconds) << '\n';
  if (r.failed) {
    std::cout << "error:             " << r.error_message;
    if (r.error_iteration)
      std::cout << " (iteration " << *r.error_iteration << ')';
    std::cout << '\n';
  }
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
  ProblemSpec spec = load_problem(config_path);
  apply_overrides(spec, ov);
  for (const auto& w : spec.warnings)
    std::cerr << "warning: " << w << '\n';
  ExperimentResult res = run_experiment(spec);
  print_report(res.report);
  std::cout << "trace:             " << res.trace_path << '\n'
            << "report:            " << res.report_path << '\n'
            << "result:            "
            << (res.report.success() ? "ok" : "not converged") << '\n';
  return res.report.success() ? kExitOk : kExitQuality;
}

int cmd_check(const std::string& config_path) {
  ProblemSpec spec = load_problem(config_path);
  std::cout << "config ok: scheme " << scheme_name(spec.config.scheme)
            << ", dimension " << spec.problem.space.dimension << ", p "
            << fmt(spec.problem.space.p) << '\n';
  for (const auto& w : spec.warnings)
    std::cout << "warning: " << w << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& dir, const Overrides& ov) {
  std::vector<fs::path> paths;
  if (!fs::is_directory(dir))
    throw ConfigError("compare: not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw ConfigError("compare: no *.json specs in " + dir);

  std::vector<ProblemSpec> specs;
  for (const auto& p : paths) {
    ProblemSpec spec = load_problem(p.string());
    apply_overrides(spec, ov);
    specs.push_back(std::move(spec));
  }
  std::string out_dir = ov.out_dir.empty() ? resolve_out_dir(specs.front())
                                           : ov.out_dir;
  std::string table = (fs::path(out_dir) / "compare.csv").string();
  CompareResult res = compare_schemes(specs, table);
  write_compare_csv(std::cout, res.rows);
  std::cout << "table: " << res.table_path << '\n';
  bool all_ok = std::all_of(res.rows.begin(), res.rows.end(),
                            [](const CompareRow& r) {
                              return r.termination != "error";
                            });
  return all_ok ? kExitOk : kExitQuality;
}

// ---------------------------------------------------------------------------
// selftest: compact invariant suites over random samples

struct SelftestState {
  std::mt19937_64 rng;
  int failures = 0;

  explicit SelftestState(unsigned long seed) : rng(seed) {}

  void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) std::cout << ": " << detail;
    std::cout << '\n';
    if (!ok) ++failures;
  }

  Vec random_vec(std::size_t d, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = u(rng);
    return v;
  }
};

void selftest_geometry(SelftestState& st) {
  double worst = 0.0;
  for (double p : {1.5, 2.0, 3.0}) {
    for (std::size_t d : {2ul, 5ul, 20ul}) {
      SpaceGeometry space = SpaceGeometry::lp(d, p);
      for (int k = 0; k < 200; ++k) {
        Vec x = st.random_vec(d, -2.0, 2.0);
        Vec y = st.random_vec(d, -2.0, 2.0);
        DualVec jx = duality_map(space, x);
        double n = norm(space, x);
        worst = std::max(worst, std::fabs(pairing(x, jx) - n * n));
        worst = std::max(worst, std::fabs(dual_norm(space, jx) - n));
        worst = std::max(
            worst, norm(space, inverse_duality_map(space, jx) - x));
        // three-point expansion of phi
        Vec z = st.random_vec(d, -2.0, 2.0);
        double lhs = lyapunov(space, x, z);
        double rhs = lyapunov(space, x, y) + lyapunov(space, y, z) +
                     2.0 * pairing(x - y, duality_map(space, y) -
                                              duality_map(space, z));
        worst = std::max(worst, std::fabs(lhs - rhs));
      }
    }
  }
  st.report("geometry identities (duality map, phi three-point)",
            worst <= 1e-10, "worst deviation " + fmt(worst));
}

void selftest_projection(SelftestState& st) {
  double worst = 0.0;
  for (double p : {2.0, 3.0}) {
    SpaceGeometry space = SpaceGeometry::lp(3, p);
    std::vector<ConvexSet> sets;
    sets.push_back(ConvexSet::box(Vec{-0.5, -0.5, -0.5}, Vec{0.5, 0.5, 0.5}));
    sets.push_back(ConvexSet::ball(Vec{0.1, 0.0, -0.1}, 0.75));
    sets.push_back(
        ConvexSet::halfspace(HalfSpace{DualVec{1.0, 1.0, 0.0}, 0.25}));
    for (const auto& set : sets) {
      for (int k = 0; k < 25; ++k) {
        Vec x = st.random_vec(3, -2.0, 2.0);
        Vec pi = generalized_project(space, set, x, 1e-12).point;
        worst = std::max(worst, violation(set, pi));
        // variational characterization: <pi - y, Jx - Jpi> >= 0 for y in set
        DualVec g = duality_map(space, x) - duality_map(space, pi);
        for (int j = 0; j < 10; ++j) {
          Vec y = st.random_vec(3, -1.5, 1.5);
          Vec yc = metric_project(set, y);
          worst = std::max(worst, -pairing(pi - yc, g));
        }
      }
    }
  }
  st.report("generalized projection variational characterization",
            worst <= 1e-8, "worst margin " + fmt(worst));
}

void selftest_resolvent(SelftestState& st) {
  double worst = 0.0;
  for (double p : {2.0, 3.0}) {
    SpaceGeometry space = SpaceGeometry::lp(2, p);
    ConvexSet C = ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
    for (int k = 0; k < 10; ++k) {
      Vec a = st.random_vec(2, 0.25, 1.5);
      Mat M(2, 2, {a[0], 0.2, 0.2, a[1]});
      Bifunction f = Bifunction::vi(M, st.random_vec(2, -0.5, 0.5));
      ResolventParams prm;
      prm.r = 0.8;
      for (int j = 0; j < 10; ++j) {
        Vec x = st.random_vec(2, -2.0, 2.0);
        Vec y = st.random_vec(2, -2.0, 2.0);
        Vec tx = resolvent(space, C, f, prm, x);
        Vec ty = resolvent(space, C, f, prm, y);
        // firm nonexpansiveness of the resolvent in the Lyapunov sense
        double lhs = pairing(tx - ty, duality_map(space, tx) -
                                          duality_map(space, ty));
        double rhs = pairing(tx - ty, duality_map(space, x) -
                                          duality_map(space, y));
        worst = std::max(worst, lhs - rhs);
      }
    }
  }
  st.report("resolvent firm nonexpansiveness", worst <= 1e-7,
            "worst excess " + fmt(worst));
}

void selftest_solver(SelftestState& st) {
  Problem problem;
  problem.space = SpaceGeometry::euclidean(2);
  problem.C = ConvexSet::whole(2);
  problem.f = Bifunction::vi(Mat(2, 2, {1.0, 0.0, 0.0, 1.0}), Vec{0.0, 0.0});
  problem.S = Mapping::identity(2);
  problem.reference_solutions = {Vec{0.0, 0.0}};
  problem.oracle_limit = Vec{0.0, 0.0};
  SchemeConfig config;
  config.x0 = Vec{2.0, 0.0};
  StopRule stop;
  stop.eps_stop = 1e-8;
  stop.max_iterations = 5000;
  RunOutcome out = run_guarded(problem, config, stop);
  bool ok = !out.failed && out.trace.reason == TerminationReason::stop_rule &&
            *out.trace.distance_to_oracle <= 1e-6 &&
            out.trace.worst_containment_margin >= -1e-9 &&
            out.trace.worst_monotonicity_slack <= 1e-8;
  st.report("plane equilibrium run (margins + oracle)", ok,
            "distance " + fmt(out.trace.distance_to_oracle.value_or(-1.0)));

  // corollary rewrites agree with the dedicated schemes bit for bit
  double worst = 0.0;
  for (CorollaryKind kind : {CorollaryKind::f_zero_r_one,
                             CorollaryKind::alpha_one,
                             CorollaryKind::s_identity}) {
    Problem base = problem;
    base.C = ConvexSet::box(Vec{-1.0, -1.0}, Vec{3.0, 3.0});
    base.S = Mapping::averaged(
        0.5, Mapping::projection_onto(
                 ConvexSet::affine_subspace(2, {Vec{1.0, 0.0}})));
    base.reference_solutions.clear();
    base.oracle_limit.reset();
    SchemeConfig cfg = config;
    cfg.x0 = Vec{1.0, 1.5};
    StopRule horizon{0.0, 40};
    RunOutcome a = run_guarded(corollary_problem(kind, base),
                               corollary_config(kind, cfg), horizon);
    SchemeConfig ded = corollary_config(kind, cfg);
    ded.scheme = corollary_scheme(kind);
    RunOutcome b =
        run_guarded(corollary_problem(kind, base), ded, horizon);
    std::size_t m = std::min(a.trace.states.size(), b.trace.states.size());
    for (std::size_t i = 0; i < m; ++i)
      worst = std::max(worst, norm(base.space, a.trace.states[i].x -
                                                   b.trace.states[i].x));
  }
  st.report("corollary rewrites match dedicated schemes", worst <= 1e-10,
            "worst gap " + fmt(worst));
}

int cmd_selftest(const Overrides& ov) {
  SelftestState st(ov.seed);
  selftest_geometry(st);
  selftest_projection(st);
  selftest_resolvent(st);
  selftest_solver(st);
  std::cout << (st.failures == 0 ? "selftest: all suites passed"
                                 : "selftest: FAILURES") << '\n';
  return st.failures == 0 ? kExitOk : kExitQuality;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid projection solver for equilibrium and fixed-point "
               "problems"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--max-iter", ov.max_iter, "override stop-rule iteration cap");
  app.add_option("--eps-stop", ov.eps_stop, "override stop-rule step threshold");
  app.add_option("--out-dir", ov.out_dir,
                 "output directory (default: $HYBRIDEP_OUT_DIR or cwd)");
  app.add_option("--seed", ov.seed, "seed for sampled diagnostics");

  std::string run_config, check_config, compare_dir;
  CLI::App* run = app.add_subcommand("run", "execute one experiment");
  run->add_option("config", run_config, "problem spec (JSON)")->required();
  CLI::App* compare =
      app.add_subcommand("compare", "run all specs in a directory");
  compare->add_option("config-dir", compare_dir, "directory of *.json specs")
      ->required();
  CLI::App* check = app.add_subcommand("check", "validate a spec only");
  check->add_option("config", check_config, "problem spec (JSON)")->required();
  app.add_subcommand("selftest", "run the built-in invariant suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, ov);
    if (compare->parsed()) return cmd_compare(compare_dir, ov);
    if (check->parsed()) return cmd_check(check_config);
    return cmd_selftest(ov);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitQuality;
  }
}
