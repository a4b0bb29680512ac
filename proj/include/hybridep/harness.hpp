#pragma once

// Problem/config ingestion (versioned JSON schema), per-iteration CSV traces,
// JSON run reports, and the scheme-comparison table.
//
// JSON schema, version 1 (all numbers full-precision decimal, vectors are
// arrays, matrices are arrays of row arrays):
//
// {
//   "schema_version": 1,
//   "name": "experiment-name",
//   "space": {"kind": "euclidean"|"lp", "dimension": d[, "p": p]},
//   "set": {"kind": "whole_space", "dimension": d}
//        | {"kind": "box", "lower": [...], "upper": [...]}
//        | {"kind": "ball", "center": [...], "radius": r}
//        | {"kind": "halfspace", "normal": [...], "offset": o}
//        | {"kind": "affine", "dimension": d, "span": [[...], ...]},
//   "bifunction": {"kind": "zero", "dimension": d}
//               | {"kind": "vi", "matrix": [[...]], "shift": [...]}
//               | {"kind": "quadratic_difference", "matrix": .., "shift": ..}
//               | {"kind": "norm_like_difference", "coefficient": c,
//                  "center": [...]},
//   "mapping": {"kind": "identity", "dimension": d}
//            | {"kind": "projection_onto", "target": <set>}
//            | {"kind": "averaged", "theta": t, "inner": <mapping>}
//            | {"kind": "affine_contraction", "matrix": [[...]]},
//   "scheme": {"kind": "hybrid_ishikawa" | ...,
//              "alpha": <sequence>, "beta": <sequence>, "r": <sequence>,
//              "alpha_floor": a, "alpha_ceiling": b, "x0": [...],
//              "projection_tol": .., "resolvent_tol": ..,
//              "max_resolvent_iterations": ..},
//   "stop": {"eps_stop": .., "max_iterations": ..},
//   "tolerances": {"containment": .., "monotonicity": .., "boundedness": ..},
//   "reference_solutions": [[...], ...],   // optional
//   "oracle_limit": [...],                 // optional
//   "out_dir": "..."                       // optional
// }
//
// <sequence> is {"kind": "constant", "value": v} or
// {"kind": "power", "base": b, "coeff": c, "exponent": e, "shift": s},
// meaning value(n) = b + c * (n + s)^(-e).

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridep/solver.hpp"

namespace hybridep {

using nlohmann::json;

struct InvariantTolerances {
  double containment = 1e-9;
  double monotonicity = 1e-8;
  double boundedness = 1e-8;
};

struct ProblemSpec {
  std::string name = "experiment";
  Problem problem;
  SchemeConfig config;
  StopRule stop;
  InvariantTolerances tolerances;
  std::string out_dir;  // empty: resolved from HYBRIDEP_OUT_DIR or "."
  std::vector<std::string> warnings;  // hypothesis warnings from validation
};

// ---------------------------------------------------------------------------
// JSON (de)serialization

namespace detail {

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw ConfigError(std::string(what) + ": expected array");
  std::vector<double> c;
  c.reserve(a.size());
  for (const auto& x : a) {
    if (!x.is_number())
      throw ConfigError(std::string(what) + ": expected numeric entries");
    c.push_back(x.get<double>());
  }
  return Vec(std::move(c));
}

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (std::size_t i = 0; i < M.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < M.cols; ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const json& a, const char* what) {
  if (!a.is_array() || a.empty() || !a.front().is_array())
    throw ConfigError(std::string(what) + ": expected array of row arrays");
  std::size_t r = a.size(), c = a.front().size();
  Mat M(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (!a[i].is_array() || a[i].size() != c)
      throw ConfigError(std::string(what) + ": ragged matrix");
    for (std::size_t j = 0; j < c; ++j) M(i, j) = a[i][j].get<double>();
  }
  return M;
}

inline const json& need(const json& j, const char* key, const char* ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(ctx) + ": missing field '" + key + "'");
  return *it;
}

}  // namespace detail

inline json space_to_json(const SpaceGeometry& s) {
  json j;
  j["kind"] = s.kind == SpaceKind::euclidean ? "euclidean" : "lp";
  j["dimension"] = s.dimension;
  if (s.kind == SpaceKind::p_norm) j["p"] = s.p;
  return j;
}

inline SpaceGeometry space_from_json(const json& j) {
  using detail::need;
  std::string kind = need(j, "kind", "space").get<std::string>();
  auto d = need(j, "dimension", "space").get<std::size_t>();
  if (kind == "euclidean") return SpaceGeometry::euclidean(d);
  if (kind == "lp")
    return SpaceGeometry::lp(d, need(j, "p", "space").get<double>());
  throw ConfigError("space: unknown kind '" + kind + "'");
}

inline json set_to_json(const ConvexSet& s) {
  using detail::mat_to_json;
  using detail::vec_to_json;
  json j;
  switch (s.kind()) {
    case SetKind::whole_space:
      j["kind"] = "whole_space";
      j["dimension"] = s.dim();
      break;
    case SetKind::box:
      j["kind"] = "box";
      j["lower"] = vec_to_json(s.lower());
      j["upper"] = vec_to_json(s.upper());
      break;
    case SetKind::ball:
      j["kind"] = "ball";
      j["center"] = vec_to_json(s.center());
      j["radius"] = s.radius();
      break;
    case SetKind::halfspace:
      j["kind"] = "halfspace";
      j["normal"] = vec_to_json(as_primal(s.hs().normal));
      j["offset"] = s.hs().offset;
      break;
    case SetKind::affine: {
      j["kind"] = "affine";
      j["dimension"] = s.dim();
      json span = json::array();
      for (const Vec& b : s.basis()) span.push_back(vec_to_json(b));
      j["span"] = span;
      break;
    }
    case SetKind::with_cuts:
      throw ConfigError("set_to_json: cut-augmented sets are runtime-only");
  }
  return j;
}

inline ConvexSet set_from_json(const json& j) {
  using detail::need;
  using detail::vec_from_json;
  std::string kind = need(j, "kind", "set").get<std::string>();
  if (kind == "whole_space")
    return ConvexSet::whole(need(j, "dimension", "set").get<std::size_t>());
  if (kind == "box")
    return ConvexSet::box(vec_from_json(need(j, "lower", "set"), "set.lower"),
                          vec_from_json(need(j, "upper", "set"), "set.upper"));
  if (kind == "ball")
    return ConvexSet::ball(
        vec_from_json(need(j, "center", "set"), "set.center"),
        need(j, "radius", "set").get<double>());
  if (kind == "halfspace")
    return ConvexSet::halfspace(HalfSpace{
        as_dual(vec_from_json(need(j, "normal", "set"), "set.normal")),
        need(j, "offset", "set").get<double>()});
  if (kind == "affine") {
    std::vector<Vec> span;
    for (const auto& b : need(j, "span", "set"))
      span.push_back(vec_from_json(b, "set.span"));
    return ConvexSet::affine_subspace(
        need(j, "dimension", "set").get<std::size_t>(), span);
  }
  throw ConfigError("set: unknown kind '" + kind + "'");
}

inline json bifunction_to_json(const Bifunction& f) {
  using detail::mat_to_json;
  using detail::vec_to_json;
  json j;
  switch (f.kind()) {
    case BifunctionKind::zero:
      j["kind"] = "zero";
      j["dimension"] = f.dim();
      break;
    case BifunctionKind::vi:
      j["kind"] = "vi";
      j["matrix"] = mat_to_json(f.matrix());
      j["shift"] = vec_to_json(f.shift());
      break;
    case BifunctionKind::convex_difference:
      if (f.g_kind() == ConvexFunctionKind::quadratic) {
        j["kind"] = "quadratic_difference";
        j["matrix"] = mat_to_json(f.matrix());
        j["shift"] = vec_to_json(f.shift());
      } else {
        j["kind"] = "norm_like_difference";
        j["coefficient"] = f.coefficient();
        j["center"] = vec_to_json(f.shift());
      }
      break;
  }
  return j;
}

inline Bifunction bifunction_from_json(const json& j) {
  using detail::mat_from_json;
  using detail::need;
  using detail::vec_from_json;
  std::string kind = need(j, "kind", "bifunction").get<std::string>();
  if (kind == "zero")
    return Bifunction::zero(
        need(j, "dimension", "bifunction").get<std::size_t>());
  if (kind == "vi")
    return Bifunction::vi(
        mat_from_json(need(j, "matrix", "bifunction"), "bifunction.matrix"),
        vec_from_json(need(j, "shift", "bifunction"), "bifunction.shift"));
  if (kind == "quadratic_difference")
    return Bifunction::quadratic_difference(
        mat_from_json(need(j, "matrix", "bifunction"), "bifunction.matrix"),
        vec_from_json(need(j, "shift", "bifunction"), "bifunction.shift"));
  if (kind == "norm_like_difference")
    return Bifunction::norm_like_difference(
        need(j, "coefficient", "bifunction").get<double>(),
        vec_from_json(need(j, "center", "bifunction"), "bifunction.center"));
  throw ConfigError("bifunction: unknown kind '" + kind + "'");
}

inline json mapping_to_json(const Mapping& S) {
  json j;
  switch (S.kind()) {
    case MappingKind::identity:
      j["kind"] = "identity";
      j["dimension"] = S.dim();
      break;
    case MappingKind::generalized_projection_onto:
      j["kind"] = "projection_onto";
      j["target"] = set_to_json(S.target());
      break;
    case MappingKind::averaged:
      j["kind"] = "averaged";
      j["theta"] = S.theta();
      j["inner"] = mapping_to_json(S.inner());
      break;
    case MappingKind::affine_contraction:
      j["kind"] = "affine_contraction";
      j["matrix"] = detail::mat_to_json(S.matrix());
      break;
  }
  return j;
}

inline Mapping mapping_from_json(const json& j) {
  using detail::need;
  std::string kind = need(j, "kind", "mapping").get<std::string>();
  if (kind == "identity")
    return Mapping::identity(
        need(j, "dimension", "mapping").get<std::size_t>());
  if (kind == "projection_onto")
    return Mapping::projection_onto(
        set_from_json(need(j, "target", "mapping")));
  if (kind == "averaged")
    return Mapping::averaged(need(j, "theta", "mapping").get<double>(),
                             mapping_from_json(need(j, "inner", "mapping")));
  if (kind == "affine_contraction")
    return Mapping::affine_contraction(detail::mat_from_json(
        need(j, "matrix", "mapping"), "mapping.matrix"));
  throw ConfigError("mapping: unknown kind '" + kind + "'");
}

inline json sequence_to_json(const Sequence& s) {
  json j;
  if (s.kind() == SequenceKind::constant) {
    j["kind"] = "constant";
    j["value"] = s.base();
  } else {
    j["kind"] = "power";
    j["base"] = s.base();
    j["coeff"] = s.coeff();
    j["exponent"] = s.exponent();
    j["shift"] = s.shift();
  }
  return j;
}

inline Sequence sequence_from_json(const json& j) {
  using detail::need;
  std::string kind = need(j, "kind", "sequence").get<std::string>();
  if (kind == "constant")
    return Sequence::constant(need(j, "value", "sequence").get<double>());
  if (kind == "power")
    return Sequence::power(need(j, "base", "sequence").get<double>(),
                           need(j, "coeff", "sequence").get<double>(),
                           need(j, "exponent", "sequence").get<double>(),
                           j.value("shift", 1.0));
  throw ConfigError("sequence: unknown kind '" + kind + "'");
}

inline json spec_to_json(const ProblemSpec& spec) {
  json j;
  j["schema_version"] = 1;
  j["name"] = spec.name;
  j["space"] = space_to_json(spec.problem.space);
  j["set"] = set_to_json(spec.problem.C);
  j["bifunction"] = bifunction_to_json(spec.problem.f);
  j["mapping"] = mapping_to_json(spec.problem.S);

  json sc;
  sc["kind"] = scheme_name(spec.config.scheme);
  sc["alpha"] = sequence_to_json(spec.config.alpha);
  sc["beta"] = sequence_to_json(spec.config.beta);
  sc["r"] = sequence_to_json(spec.config.r);
  sc["alpha_floor"] = spec.config.alpha_floor;
  sc["alpha_ceiling"] = spec.config.alpha_ceiling;
  sc["x0"] = detail::vec_to_json(spec.config.x0);
  sc["projection_tol"] = spec.config.projection_tol;
  sc["resolvent_tol"] = spec.config.resolvent_tol;
  sc["max_resolvent_iterations"] = spec.config.max_resolvent_iterations;
  j["scheme"] = sc;

  j["stop"] = {{"eps_stop", spec.stop.eps_stop},
               {"max_iterations", spec.stop.max_iterations}};
  j["tolerances"] = {{"containment", spec.tolerances.containment},
                     {"monotonicity", spec.tolerances.monotonicity},
                     {"boundedness", spec.tolerances.boundedness}};
  if (!spec.problem.reference_solutions.empty()) {
    json refs = json::array();
    for (const Vec& u : spec.problem.reference_solutions)
      refs.push_back(detail::vec_to_json(u));
    j["reference_solutions"] = refs;
  }
  if (spec.problem.oracle_limit)
    j["oracle_limit"] = detail::vec_to_json(*spec.problem.oracle_limit);
  if (!spec.out_dir.empty()) j["out_dir"] = spec.out_dir;
  return j;
}

// Parses and validates; scheme-hypothesis violations are fatal and carry the
// violated hypothesis in the message.
inline ProblemSpec spec_from_json(const json& j) {
  using detail::need;
  if (!j.is_object()) throw ConfigError("spec: expected a JSON object");
  int version = need(j, "schema_version", "spec").get<int>();
  if (version != 1)
    throw ConfigError("spec: unsupported schema_version " +
                      std::to_string(version));

  ProblemSpec spec;
  spec.name = j.value("name", std::string("experiment"));
  spec.problem.space = space_from_json(need(j, "space", "spec"));
  spec.problem.C = set_from_json(need(j, "set", "spec"));
  spec.problem.f = bifunction_from_json(need(j, "bifunction", "spec"));
  spec.problem.S = mapping_from_json(need(j, "mapping", "spec"));

  const json& sc = need(j, "scheme", "spec");
  auto kind = scheme_from_name(need(sc, "kind", "scheme").get<std::string>());
  if (!kind)
    throw ConfigError("scheme: unknown kind '" +
                      sc["kind"].get<std::string>() + "'");
  spec.config.scheme = *kind;
  if (sc.contains("alpha")) spec.config.alpha = sequence_from_json(sc["alpha"]);
  if (sc.contains("beta")) spec.config.beta = sequence_from_json(sc["beta"]);
  if (sc.contains("r")) spec.config.r = sequence_from_json(sc["r"]);
  spec.config.alpha_floor = sc.value("alpha_floor", 0.5);
  spec.config.alpha_ceiling = sc.value("alpha_ceiling", 1.0);
  spec.config.x0 = detail::vec_from_json(need(sc, "x0", "scheme"), "x0");
  spec.config.projection_tol = sc.value("projection_tol", 1e-10);
  spec.config.resolvent_tol = sc.value("resolvent_tol", 1e-11);
  spec.config.max_resolvent_iterations =
      sc.value("max_resolvent_iterations", 400000);

  if (j.contains("stop")) {
    spec.stop.eps_stop = j["stop"].value("eps_stop", 1e-8);
    spec.stop.max_iterations = j["stop"].value("max_iterations", 10000);
  }
  if (j.contains("tolerances")) {
    spec.tolerances.containment = j["tolerances"].value("containment", 1e-9);
    spec.tolerances.monotonicity = j["tolerances"].value("monotonicity", 1e-8);
    spec.tolerances.boundedness = j["tolerances"].value("boundedness", 1e-8);
  }
  if (j.contains("reference_solutions"))
    for (const auto& u : j["reference_solutions"])
      spec.problem.reference_solutions.push_back(
          detail::vec_from_json(u, "reference_solutions"));
  if (j.contains("oracle_limit"))
    spec.problem.oracle_limit =
        detail::vec_from_json(j["oracle_limit"], "oracle_limit");
  spec.out_dir = j.value("out_dir", std::string());

  auto rep = validate_config(spec.problem, spec.config,
                             static_cast<std::size_t>(
                                 spec.stop.max_iterations));
  if (!rep.ok())
    throw ConfigError("hypothesis violation: " + rep.joined_errors());
  spec.warnings = rep.warnings;
  return spec;
}

inline ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_problem: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("load_problem: parse error in '" + path +
                      "': " + e.what());
  }
  return spec_from_json(j);
}

inline void save_problem(const ProblemSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_problem: cannot open '" + path + "'");
  out << spec_to_json(spec).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Reports and trace files

struct RunReport {
  std::string name;
  std::string scheme;
  std::string termination;  // stop_rule | iteration_cap | error
  std::size_t iterations = 0;
  Vec final_point;
  double final_res_S = 0.0;
  double final_res_zx = 0.0;
  double final_res_zu = 0.0;
  double final_res_yz = 0.0;
  double worst_containment_margin = 0.0;
  double worst_monotonicity_slack = 0.0;
  double worst_boundedness_slack = 0.0;
  std::optional<double> distance_to_oracle;
  double wall_seconds = 0.0;
  bool stop_rule_fired = false;
  bool margins_ok = true;
  bool failed = false;
  std::string error_message;
  std::optional<std::size_t> error_iteration;

  // CLI contract: success means the stop rule fired and margins held
  bool success() const { return stop_rule_fired && margins_ok && !failed; }
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace detail

inline json report_to_json(const RunReport& r) {
  json j;
  j["name"] = r.name;
  j["scheme"] = r.scheme;
  j["termination"] = r.termination;
  j["iterations"] = r.iterations;
  j["final_point"] = detail::vec_to_json(r.final_point);
  j["final_residuals"] = {{"res_S", detail::finite_or_null(r.final_res_S)},
                          {"res_zx", detail::finite_or_null(r.final_res_zx)},
                          {"res_zu", detail::finite_or_null(r.final_res_zu)},
                          {"res_yz", detail::finite_or_null(r.final_res_yz)}};
  j["worst_margins"] = {{"containment", r.worst_containment_margin},
                        {"monotonicity", r.worst_monotonicity_slack},
                        {"boundedness", r.worst_boundedness_slack}};
  j["distance_to_oracle"] =
      r.distance_to_oracle ? json(*r.distance_to_oracle) : json(nullptr);
  j["wall_seconds"] = r.wall_seconds;
  j["stop_rule_fired"] = r.stop_rule_fired;
  j["margins_ok"] = r.margins_ok;
  j["success"] = r.success();
  if (r.failed) {
    j["error"] = {{"message", r.error_message},
                  {"iteration", r.error_iteration ? json(*r.error_iteration)
                                                  : json(nullptr)}};
  }
  return j;
}

inline RunReport make_report(const ProblemSpec& spec, const RunOutcome& out,
                             double wall_seconds) {
  const IterationTrace& tr = out.trace;
  RunReport r;
  r.name = spec.name;
  r.scheme = scheme_name(spec.config.scheme);
  r.termination = out.failed ? "error" : termination_name(tr.reason);
  r.iterations = tr.iterations;
  r.final_point = tr.final_point;
  r.final_res_S = tr.final_res_S;
  r.final_res_zx = tr.final_res_zx;
  r.final_res_zu = tr.final_res_zu;
  r.final_res_yz = tr.final_res_yz;
  r.worst_containment_margin = tr.worst_containment_margin;
  r.worst_monotonicity_slack = tr.worst_monotonicity_slack;
  r.worst_boundedness_slack = tr.worst_boundedness_slack;
  r.distance_to_oracle = tr.distance_to_oracle;
  r.wall_seconds = wall_seconds;
  r.stop_rule_fired =
      !out.failed && tr.reason == TerminationReason::stop_rule;
  r.margins_ok =
      tr.worst_containment_margin >= -spec.tolerances.containment &&
      tr.worst_monotonicity_slack <= spec.tolerances.monotonicity &&
      tr.worst_boundedness_slack <= spec.tolerances.boundedness;
  r.failed = out.failed;
  if (out.failed) {
    r.error_message = out.error_message;
    r.error_iteration = out.failed_iteration;
  }
  return r;
}

// One row per produced iterate; the step columns describe the step that
// produced the row's point (phi_step = phi(x_n, x_{n-1})).
inline void write_trace_csv(std::ostream& os, const IterationTrace& tr) {
  os << "n";
  std::size_t d =
      tr.states.empty() ? tr.final_point.size() : tr.states[0].x.size();
  for (std::size_t i = 0; i < d; ++i) os << ",x_" << i;
  os << ",phi_anchor,phi_step,res_S,res_zx,res_zu,solution_contained\n";
  for (const auto& st : tr.states) {
    os << st.n;
    for (std::size_t i = 0; i < d; ++i)
      os << ',' << detail::fmt17(st.x[i]);
    const auto& g = st.diagnostics;
    os << ',' << detail::fmt17(g.phi_anchor) << ','
       << detail::fmt17(g.phi_step) << ',' << detail::fmt17(g.res_S) << ','
       << detail::fmt17(g.res_zx) << ',' << detail::fmt17(g.res_zu) << ','
       << (g.solution_contained ? 1 : 0) << '\n';
  }
}

inline std::string default_out_dir() {
  if (const char* env = std::getenv("HYBRIDEP_OUT_DIR"))
    if (*env) return env;
  return ".";
}

inline std::string resolve_out_dir(const ProblemSpec& spec) {
  return spec.out_dir.empty() ? default_out_dir() : spec.out_dir;
}

namespace detail {

inline std::string sanitize_name(const std::string& name) {
  std::string s;
  for (char c : name)
    s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
             ? c
             : '_';
  return s.empty() ? "experiment" : s;
}

}  // namespace detail

struct ExperimentResult {
  RunReport report;
  IterationTrace trace;
  std::string trace_path;
  std::string report_path;
};

// Executes the run and writes <name>_trace.csv and <name>_report.json.
// Solver failures (e.g. infeasible cuts) are captured in the report with the
// failing iteration; configuration errors still throw.
inline ExperimentResult run_experiment(const ProblemSpec& spec) {
  namespace fs = std::filesystem;
  auto t0 = std::chrono::steady_clock::now();
  RunOutcome out = run_guarded(spec.problem, spec.config, spec.stop);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  ExperimentResult res;
  res.report = make_report(spec, out, wall);
  res.trace = std::move(out.trace);

  fs::path dir(resolve_out_dir(spec));
  fs::create_directories(dir);
  std::string stem = detail::sanitize_name(spec.name);
  fs::path trace_path = dir / (stem + "_trace.csv");
  fs::path report_path = dir / (stem + "_report.json");

  std::ofstream tf(trace_path);
  if (!tf)
    throw Error("run_experiment: cannot write " + trace_path.string());
  write_trace_csv(tf, res.trace);

  std::ofstream rf(report_path);
  if (!rf)
    throw Error("run_experiment: cannot write " + report_path.string());
  rf << report_to_json(res.report).dump(2) << '\n';

  res.trace_path = trace_path.string();
  res.report_path = report_path.string();
  return res;
}

// ---------------------------------------------------------------------------
// Scheme comparison

struct CompareRow {
  std::string scheme;
  std::string termination;
  std::size_t iterations = 0;
  // first iterate within the threshold distance of the shared oracle;
  // -1 when never reached
  long long iters_to_1e3 = -1;
  long long iters_to_1e6 = -1;
  double final_distance = 0.0;
  double containment_margin = 0.0;
  double monotonicity_slack = 0.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::string table_path;
};

inline void write_compare_csv(std::ostream& os,
                              const std::vector<CompareRow>& rows) {
  os << "scheme,termination,iterations,iters_to_1e-3,iters_to_1e-6,"
        "final_distance,containment_margin,monotonicity_slack\n";
  for (const auto& r : rows) {
    os << r.scheme << ',' << r.termination << ',' << r.iterations << ','
       << r.iters_to_1e3 << ',' << r.iters_to_1e6 << ','
       << detail::fmt17(r.final_distance) << ','
       << detail::fmt17(r.containment_margin) << ','
       << detail::fmt17(r.monotonicity_slack) << '\n';
  }
}

// All specs must pose the same problem (space, C, f, S, x0, oracle); each row
// reports one scheme. The shared oracle limit is required.
inline CompareResult compare_schemes(const std::vector<ProblemSpec>& specs,
                                     const std::string& out_path) {
  if (specs.empty())
    throw ConfigError("compare_schemes: no specs given");
  auto problem_signature = [](const ProblemSpec& s) {
    json j;
    j["space"] = space_to_json(s.problem.space);
    j["set"] = set_to_json(s.problem.C);
    j["bifunction"] = bifunction_to_json(s.problem.f);
    j["mapping"] = mapping_to_json(s.problem.S);
    j["x0"] = detail::vec_to_json(s.config.x0);
    j["oracle"] = s.problem.oracle_limit
                      ? detail::vec_to_json(*s.problem.oracle_limit)
                      : json(nullptr);
    return j;
  };
  const json sig = problem_signature(specs.front());
  if (!specs.front().problem.oracle_limit)
    throw ConfigError("compare_schemes: specs need a shared oracle_limit");
  for (const auto& s : specs) {
    if (problem_signature(s) != sig)
      throw ConfigError("compare_schemes: spec '" + s.name +
                        "' poses a different problem");
    auto rep = validate_config(s.problem, s.config,
                               static_cast<std::size_t>(
                                   s.stop.max_iterations));
    if (!rep.ok())
      throw ConfigError("compare_schemes: " + rep.joined_errors());
  }

  CompareResult result;
  const Vec& oracle = *specs.front().problem.oracle_limit;
  for (const auto& s : specs) {
    RunOutcome out = run_guarded(s.problem, s.config, s.stop);
    const IterationTrace& tr = out.trace;
    CompareRow row;
    row.scheme = scheme_name(s.config.scheme);
    row.termination = out.failed ? "error" : termination_name(tr.reason);
    row.iterations = tr.iterations;
    for (const auto& st : tr.states) {
      double dist = norm(s.problem.space, st.x - oracle);
      if (row.iters_to_1e3 < 0 && dist <= 1e-3)
        row.iters_to_1e3 = static_cast<long long>(st.n);
      if (row.iters_to_1e6 < 0 && dist <= 1e-6)
        row.iters_to_1e6 = static_cast<long long>(st.n);
    }
    row.final_distance = norm(s.problem.space, tr.final_point - oracle);
    row.containment_margin = tr.worst_containment_margin;
    row.monotonicity_slack = tr.worst_monotonicity_slack;
    result.rows.push_back(row);
  }

  if (!out_path.empty()) {
    namespace fs = std::filesystem;
    fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw Error("compare_schemes: cannot write " + out_path);
    write_compare_csv(os, result.rows);
    result.table_path = out_path;
  }
  return result;
}

}  // namespace hybridep
