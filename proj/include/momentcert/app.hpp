#pragma once

// Problem files, reports, and the three batch commands behind the
// momentcert executable. Kept in the library so the commands can be driven
// from tests without spawning processes.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentcert/certificates.hpp"
#include "momentcert/oracle.hpp"
#include "momentcert/problem.hpp"
#include "momentcert/relaxed_solver.hpp"

namespace momentcert::app {

using json = nlohmann::json;

inline constexpr const char* kProblemSchema = "momentcert.problem/1";
inline constexpr const char* kReportSchema = "momentcert.report/1";
inline constexpr const char* kTrajectorySchema = "momentcert.trajectory/1";

enum ExitCode : int {
  kExitOk = 0,
  kExitFail = 1,
  kExitBoundary = 2,
  kExitInput = 3,
  kExitExtraction = 4,
  kExitDivergence = 5,
};

// ---------------------------------------------------------------------------
// Field access with JSON-pointer diagnostics
// ---------------------------------------------------------------------------

[[noreturn]] inline void fail_at(const std::string& path, const std::string& msg) {
  throw InputError((path.empty() ? std::string("/") : path) + ": " + msg);
}

inline const json& member(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail_at(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail_at(path + "/" + key, "missing required field");
  return *it;
}

inline const json* optional_member(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail_at(path, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail_at(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail_at(path, "expected a finite number");
  return v;
}

inline int read_int(const json& j, const std::string& path, int min_value) {
  if (!j.is_number_integer()) fail_at(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < min_value || v > 100000000) fail_at(path, "integer out of range (minimum " + std::to_string(min_value) + ")");
  return static_cast<int>(v);
}

inline std::vector<double> read_numbers(const json& j, const std::string& path, std::optional<std::size_t> size = {}) {
  if (!j.is_array()) fail_at(path, "expected an array of numbers");
  if (size && j.size() != *size) {
    fail_at(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(j.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_number(j[i], path + "/" + std::to_string(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial coefficients
// ---------------------------------------------------------------------------

/// A polynomial in the state x with at most cubic degree per variable.
/// File form: a plain number, or {"terms": [{"coef": a, "powers": [k1..kN]}, ...]}.
struct Polynomial {
  struct Term {
    double coef = 0.0;
    std::vector<int> powers;
  };
  std::vector<Term> terms;

  bool is_constant() const {
    for (const auto& t : terms) {
      for (int k : t.powers) {
        if (k != 0 && t.coef != 0.0) return false;
      }
    }
    return true;
  }

  double operator()(const Vector& x) const {
    double sum = 0.0;
    for (const auto& t : terms) {
      double v = t.coef;
      for (std::size_t i = 0; i < t.powers.size(); ++i) v *= std::pow(x[static_cast<Eigen::Index>(i)], t.powers[i]);
      sum += v;
    }
    return sum;
  }

  static Polynomial constant(double a, int N) { return Polynomial{{Term{a, std::vector<int>(N, 0)}}}; }
};

inline Polynomial read_polynomial(const json& j, int N, const std::string& path) {
  if (j.is_number()) return Polynomial::constant(read_number(j, path), N);
  const json& terms = member(j, "terms", path);
  if (!terms.is_array() || terms.empty()) fail_at(path + "/terms", "expected a nonempty array of terms");
  Polynomial p;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string tp = path + "/terms/" + std::to_string(i);
    Polynomial::Term t;
    t.coef = read_number(member(terms[i], "coef", tp), tp + "/coef");
    const json& pw = member(terms[i], "powers", tp);
    if (!pw.is_array() || pw.size() != static_cast<std::size_t>(N)) {
      fail_at(tp + "/powers", "expected one exponent per state variable (" + std::to_string(N) + ")");
    }
    for (std::size_t k = 0; k < pw.size(); ++k) {
      const int e = read_int(pw[k], tp + "/powers/" + std::to_string(k), 0);
      if (e > 3) fail_at(tp + "/powers/" + std::to_string(k), "degree per variable is limited to 3");
      t.powers.push_back(e);
    }
    p.terms.push_back(std::move(t));
  }
  return p;
}

inline std::vector<Polynomial> read_poly_vector(const json& j, int size, int N, const std::string& path) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(size)) {
    fail_at(path, "expected an array of " + std::to_string(size) + " coefficients");
  }
  std::vector<Polynomial> out;
  for (int i = 0; i < size; ++i) out.push_back(read_polynomial(j[i], N, path + "/" + std::to_string(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

struct RunConfig {
  std::optional<std::vector<std::string>> certificates;  // empty optional: all applicable
  int state_samples = 11;
  int steps = 20;
  SolverOptions solver;
  double extraction_tol = 1e-4;
  int cert_u_grid = 101;
  int geom_grid = 200;
  int geom_root_scan = 1000;
  int ncq_samples = 10000;
  DPConfig dp;
  int probe_grid = 201;
  int relaxation_trials = 100;
};

struct ProblemFile {
  std::string name;
  ProblemSpec spec;
  std::vector<Polynomial> c_poly;
  std::vector<std::vector<Polynomial>> Q_poly;
  std::vector<Polynomial> Q0_poly;
  RunConfig run;

  bool constant_coefficients() const {
    auto all_const = [](const std::vector<Polynomial>& v) {
      return std::all_of(v.begin(), v.end(), [](const Polynomial& p) { return p.is_constant(); });
    };
    if (!all_const(c_poly) || !all_const(Q0_poly)) return false;
    return std::all_of(Q_poly.begin(), Q_poly.end(), all_const);
  }
};

inline const std::vector<std::string>& certificate_names() {
  static const std::vector<std::string> names = {"p2",          "p3_monotone", "p3_zero_linear", "geom_m1",
                                                 "theorem_sec", "ncq_subset",  "ex1",            "ex2",
                                                 "ex3",         "corollary3"};
  return names;
}

inline void read_run(const json& run, ProblemFile& pf, const std::string& path) {
  RunConfig& rc = pf.run;
  if (const json* j = optional_member(run, "certificates", path)) {
    if (!j->is_array()) fail_at(path + "/certificates", "expected an array of certificate names");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < j->size(); ++i) {
      const std::string p = path + "/certificates/" + std::to_string(i);
      if (!(*j)[i].is_string()) fail_at(p, "expected a certificate name");
      const auto name = (*j)[i].get<std::string>();
      const auto& known = certificate_names();
      if (std::find(known.begin(), known.end(), name) == known.end()) fail_at(p, "unknown certificate '" + name + "'");
      names.push_back(name);
    }
    rc.certificates = names;
  }
  if (const json* j = optional_member(run, "state_range", path)) {
    const std::string p = path + "/state_range";
    const int N = pf.spec.state_dim();
    const Vector lo = to_vector(read_numbers(member(*j, "lower", p), p + "/lower", N));
    const Vector hi = to_vector(read_numbers(member(*j, "upper", p), p + "/upper", N));
    if ((lo.array() > hi.array()).any()) fail_at(p, "lower must not exceed upper");
    pf.spec.state_range = std::make_pair(lo, hi);
    if (const json* s = optional_member(*j, "samples", p)) rc.state_samples = read_int(*s, p + "/samples", 1);
  }
  if (const json* s = optional_member(run, "solver", path)) {
    const std::string p = path + "/solver";
    if (!s->is_object()) fail_at(p, "expected an object");
    for (const auto& [key, value] : s->items()) {
      const std::string kp = p + "/" + key;
      if (key == "steps") rc.steps = read_int(value, kp, 1);
      else if (key == "starts") rc.solver.starts = read_int(value, kp, 1);
      else if (key == "max_iterations") rc.solver.max_iterations = read_int(value, kp, 1);
      else if (key == "relative_tolerance") rc.solver.relative_tolerance = read_number(value, kp);
      else if (key == "seed") rc.solver.seed = static_cast<std::uint64_t>(read_int(value, kp, 0));
      else if (key == "atoms_per_step") rc.solver.atoms_per_step = read_int(value, kp, 0);
      else if (key == "fd_step") rc.solver.fd_step = read_number(value, kp);
      else if (key == "extraction_tol") rc.extraction_tol = read_number(value, kp);
      else fail_at(kp, "unknown solver option");
    }
  }
  if (const json* o = optional_member(run, "oracle", path)) {
    const std::string p = path + "/oracle";
    if (!o->is_object()) fail_at(p, "expected an object");
    for (const auto& [key, value] : o->items()) {
      const std::string kp = p + "/" + key;
      if (key == "dp_state_points") rc.dp.state_points = read_int(value, kp, 3);
      else if (key == "dp_control_points") rc.dp.control_points = read_int(value, kp, 2);
      else if (key == "probe_grid") rc.probe_grid = read_int(value, kp, 5);
      else if (key == "relaxation_trials") rc.relaxation_trials = read_int(value, kp, 0);
      else fail_at(kp, "unknown oracle option");
    }
  }
  if (const json* c = optional_member(run, "certificate_options", path)) {
    const std::string p = path + "/certificate_options";
    if (!c->is_object()) fail_at(p, "expected an object");
    for (const auto& [key, value] : c->items()) {
      const std::string kp = p + "/" + key;
      if (key == "u_grid") rc.cert_u_grid = read_int(value, kp, 2);
      else if (key == "geom_grid") rc.geom_grid = read_int(value, kp, 3);
      else if (key == "geom_root_scan") rc.geom_root_scan = read_int(value, kp, 3);
      else if (key == "ncq_samples") rc.ncq_samples = read_int(value, kp, 1);
      else fail_at(kp, "unknown certificate option");
    }
  }
}

/// Builds a ProblemFile from a parsed document. Every failure is an
/// InputError whose message starts with the JSON pointer of the field.
inline ProblemFile parse_problem(const json& doc) {
  if (!doc.is_object()) fail_at("", "problem file must be a JSON object");
  if (const json* s = optional_member(doc, "schema", "")) {
    if (!s->is_string() || s->get<std::string>() != kProblemSchema) {
      fail_at("/schema", std::string("unsupported schema, expected \"") + kProblemSchema + "\"");
    }
  }
  ProblemFile pf;
  if (const json* n = optional_member(doc, "name", "")) {
    if (!n->is_string()) fail_at("/name", "expected a string");
    pf.name = n->get<std::string>();
  }

  const json& basis = member(doc, "basis", "");
  const json& kind = member(basis, "kind", "/basis");
  if (!kind.is_string()) fail_at("/basis/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  try {
    if (k == "power1d") {
      pf.spec.basis = ControlBasis::power1d(read_int(member(basis, "p", "/basis"), "/basis/p", 0));
    } else if (k == "quadratic_diag") {
      pf.spec.basis = ControlBasis::quadratic_diag(read_int(member(basis, "n", "/basis"), "/basis/n", 0));
    } else {
      fail_at("/basis/kind", "expected \"power1d\" or \"quadratic_diag\"");
    }
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind("/basis", 0) == 0) throw;
    fail_at("/basis", msg);
  }
  const int n = pf.spec.basis.control_dim();
  const int s = pf.spec.basis.moment_dim();

  const json& K = member(doc, "K", "");
  const auto lo = read_numbers(member(K, "lower", "/K"), "/K/lower", n);
  const auto hi = read_numbers(member(K, "upper", "/K"), "/K/upper", n);
  try {
    pf.spec.K = CompactControlSet::box(lo, hi);
  } catch (const InputError& e) {
    fail_at("/K", e.what());
  }

  const json& horizon = member(doc, "horizon", "");
  const json& x0 = member(horizon, "x0", "/horizon");
  pf.spec.x0 = to_vector(read_numbers(x0, "/horizon/x0"));
  const int N = pf.spec.state_dim();
  if (N == 0) fail_at("/horizon/x0", "state dimension must be at least 1");
  pf.spec.T = read_number(member(horizon, "T", "/horizon"), "/horizon/T");
  if (!(pf.spec.T > 0.0)) fail_at("/horizon/T", "horizon T must be > 0");

  const json& coef = member(doc, "coefficients", "");
  pf.c_poly = read_poly_vector(member(coef, "c", "/coefficients"), s, N, "/coefficients/c");
  const json& Q = member(coef, "Q", "/coefficients");
  if (!Q.is_array() || Q.size() != static_cast<std::size_t>(N)) {
    fail_at("/coefficients/Q", "expected " + std::to_string(N) + " rows (one per state)");
  }
  for (int i = 0; i < N; ++i) {
    pf.Q_poly.push_back(read_poly_vector(Q[i], s, N, "/coefficients/Q/" + std::to_string(i)));
  }
  if (const json* dyn = optional_member(doc, "dynamics", "")) {
    if (const json* q0 = optional_member(*dyn, "Q0", "/dynamics")) {
      pf.Q0_poly = read_poly_vector(*q0, N, N, "/dynamics/Q0");
    }
  }

  const auto c_poly = pf.c_poly;
  pf.spec.c = [c_poly](const Vector& x) {
    Vector v(static_cast<Eigen::Index>(c_poly.size()));
    for (std::size_t i = 0; i < c_poly.size(); ++i) v[static_cast<Eigen::Index>(i)] = c_poly[i](x);
    return v;
  };
  const auto Q_poly = pf.Q_poly;
  pf.spec.Q = [Q_poly, s](const Vector& x) {
    Matrix m(static_cast<Eigen::Index>(Q_poly.size()), s);
    for (std::size_t i = 0; i < Q_poly.size(); ++i) {
      for (int j = 0; j < s; ++j) m(static_cast<Eigen::Index>(i), j) = Q_poly[i][j](x);
    }
    return m;
  };
  if (!pf.Q0_poly.empty()) {
    const auto Q0_poly = pf.Q0_poly;
    pf.spec.Q0 = [Q0_poly](const Vector& x) {
      Vector v(static_cast<Eigen::Index>(Q0_poly.size()));
      for (std::size_t i = 0; i < Q0_poly.size(); ++i) v[static_cast<Eigen::Index>(i)] = Q0_poly[i](x);
      return v;
    };
  }

  if (const json* run = optional_member(doc, "run", "")) read_run(*run, pf, "/run");
  validate(pf.spec);
  return pf;
}

/// Parses text, turning JSON syntax errors into line/column diagnostics.
inline ProblemFile parse_problem_text(const std::string& text, const std::string& origin = "<input>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                     e.what() + ")");
  }
  try {
    return parse_problem(doc);
  } catch (const InputError& e) {
    throw InputError(origin + ": " + e.what());
  } catch (const DimensionError& e) {
    throw InputError(origin + ": " + e.what());
  }
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open problem file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Command options
// ---------------------------------------------------------------------------

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> grid;  // points per axis of every control-space scan
  std::optional<double> tol;
  int threads = 1;
  std::optional<std::string> csv_path;
};

/// Thread count from MOMENTCERT_THREADS, defaulting to 1.
inline int threads_from_environment() {
  const char* v = std::getenv("MOMENTCERT_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 256) throw InputError("MOMENTCERT_THREADS must be an integer in [1, 256]");
  return static_cast<int>(n);
}

inline void apply_overrides(ProblemFile& pf, const CommandOptions& opt) {
  RunConfig& rc = pf.run;
  if (opt.seed) rc.solver.seed = *opt.seed;
  if (opt.steps) {
    if (*opt.steps < 1) throw InputError("--steps must be >= 1");
    rc.steps = *opt.steps;
  }
  if (opt.grid) {
    if (*opt.grid < 3) throw InputError("--grid must be >= 3");
    rc.cert_u_grid = rc.geom_grid = rc.dp.control_points = *opt.grid;
  }
  if (opt.tol) {
    if (!(*opt.tol > 0.0)) throw InputError("--tol must be > 0");
    rc.extraction_tol = *opt.tol;
  }
  rc.solver.threads = opt.threads;
}

// ---------------------------------------------------------------------------
// Report pieces
// ---------------------------------------------------------------------------

inline json to_json(const Certificate& c) {
  json j;
  j["statement"] = c.statement;
  j["verdict"] = to_string(c.verdict);
  j["quantities"] = c.quantities;
  j["samples"] = c.samples;
  j["notes"] = c.notes;
  if (c.witness) {
    j["witness"] = {{"description", c.witness->description}, {"values", c.witness->values}};
  } else {
    j["witness"] = nullptr;
  }
  return j;
}

inline json vectors_to_json(const std::vector<Vector>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(to_std(v));
  return out;
}

inline json reproducibility_block(const ProblemFile& pf) {
  const RunConfig& rc = pf.run;
  return {{"seed", rc.solver.seed},
          {"steps", rc.steps},
          {"starts", rc.solver.starts},
          {"max_iterations", rc.solver.max_iterations},
          {"atoms_per_step", rc.solver.atoms_per_step},
          {"state_samples", rc.state_samples},
          {"cert_u_grid", rc.cert_u_grid},
          {"geom_grid", rc.geom_grid},
          {"geom_root_scan", rc.geom_root_scan},
          {"ncq_samples", rc.ncq_samples},
          {"dp_state_points", rc.dp.state_points},
          {"dp_control_points", rc.dp.control_points},
          {"probe_grid", rc.probe_grid},
          {"relaxation_trials", rc.relaxation_trials},
          {"distance_grid", kDistanceGrid}};
}

inline json tolerance_block(const ProblemFile& pf) {
  return {{"strict_margin", kStrictMargin},
          {"extraction_tol", pf.run.extraction_tol},
          {"solver_relative_tolerance", pf.run.solver.relative_tolerance},
          {"fd_step", pf.run.solver.fd_step},
          {"relaxation_slack", 1e-6}};
}

struct CommandResult {
  int exit_code = kExitOk;
  json report;
  std::string summary;  // short human-readable line
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline json report_skeleton(const std::string& command, const ProblemFile& pf) {
  json r;
  r["schema"] = kReportSchema;
  r["command"] = command;
  r["problem"] = {{"name", pf.name},
                  {"basis", pf.spec.basis.name()},
                  {"state_dim", pf.spec.state_dim()},
                  {"K", {{"lower", to_std(pf.spec.K.lower())}, {"upper", to_std(pf.spec.K.upper())}}},
                  {"x0", to_std(pf.spec.x0)},
                  {"T", pf.spec.T}};
  r["reproducibility"] = reproducibility_block(pf);
  r["tolerances"] = tolerance_block(pf);
  return r;
}

inline json error_report(const std::string& command, const std::string& kind, const std::string& message) {
  return {{"schema", kReportSchema}, {"command", command}, {"error", {{"kind", kind}, {"message", message}}}};
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

inline std::vector<Vector> certificate_states(const ProblemFile& pf) {
  if (pf.constant_coefficients()) return {pf.spec.x0};
  const auto [lo, hi] = pf.spec.effective_state_range();
  return state_samples(lo, hi, pf.run.state_samples);
}

namespace detail {

inline bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(b)); }

inline bool holds_everywhere(const std::vector<Vector>& xs, const std::function<bool(const Vector&)>& pred) {
  return std::all_of(xs.begin(), xs.end(), pred);
}

inline bool drift_free(const ProblemFile& pf, const std::vector<Vector>& xs) {
  return holds_everywhere(xs, [&](const Vector& x) { return pf.spec.drift_at(x).norm() == 0.0; });
}

inline StructuredProblem structured(const ProblemSpec& sp) {
  const int n = sp.basis.control_dim();
  StructuredProblem out;
  out.n = n;
  const auto Q = sp.Q;
  const auto c = sp.c;
  out.Q1 = [Q, n](const Vector& x) -> Matrix { return Q(x).leftCols(n); };
  out.Q2 = [Q, n](const Vector& x) -> Matrix { return Q(x).rightCols(n); };
  out.c1 = [c, n](const Vector& x) -> Vector { return c(x).head(n); };
  out.c2 = [c, n](const Vector& x) -> Vector { return c(x).tail(n); };
  out.Q0 = sp.Q0;
  return out;
}

}  // namespace detail

/// Why `name` cannot run on this problem, or nullopt when it can.
inline std::optional<std::string> inapplicable_reason(const std::string& name, const ProblemFile& pf,
                                                      const std::vector<Vector>& xs) {
  const ProblemSpec& sp = pf.spec;
  const ControlBasis& b = sp.basis;
  const int N = sp.state_dim();
  const bool p2 = b.kind() == BasisKind::power1d && b.degree() == 2;
  const bool p3 = b.kind() == BasisKind::power1d && b.degree() == 3;
  const bool quad = b.kind() == BasisKind::quadratic_diag;
  auto c_at = [&](const Vector& x) { return sp.cost_at(x); };
  auto Q_at = [&](const Vector& x) { return sp.dynamics_at(x); };

  if (name == "p2") {
    if (!p2 || N != 1) return "needs basis power1d(2) and one state";
    return std::nullopt;
  }
  if (name == "p3_monotone") {
    if (!p3 || N != 1) return "needs basis power1d(3) and one state";
    return std::nullopt;
  }
  if (name == "p3_zero_linear") {
    if (!p3 || N != 1) return "needs basis power1d(3) and one state";
    if (sp.K.lower(0) <= 0.0 && sp.K.upper(0) >= 0.0) return "needs K on one side of 0";
    const bool shape = detail::holds_everywhere(xs, [&](const Vector& x) {
      const Vector c = c_at(x), q = Q_at(x).row(0).transpose();
      return std::abs(c[0]) <= kStrictMargin && std::abs(q[0]) <= kStrictMargin && q[2] != 0.0;
    });
    if (!shape) return "needs zero linear components c1 = q1 = 0 and q3 != 0 at every sampled state";
    return std::nullopt;
  }
  if (name == "geom_m1") {
    if (!p3 || N != 1) return "needs basis power1d(3) and one state";
    if (!(sp.K.lower(0) > 0.0)) return "needs K inside (0, inf)";
    return std::nullopt;
  }
  if (name == "theorem_sec") {
    if (!quad || N != b.control_dim()) return "needs basis quadratic_diag(n) with n states";
    return std::nullopt;
  }
  if (name == "ncq_subset") {
    if (!psi_convex_on(b, sp.K)) return "Psi is not convex on K for this basis";
    return std::nullopt;
  }
  if (name == "ex1") {
    if (!p2 || N != 1) return "needs basis power1d(2) and one state";
    const bool shape = detail::holds_everywhere(xs, [&](const Vector& x) {
      return detail::near(c_at(x)[1], 1.0) && detail::near(Q_at(x)(0, 1), 1.0);
    });
    if (!shape || !detail::drift_free(pf, xs)) return "needs cost c u + u^2 and dynamics q u + u^2";
    return std::nullopt;
  }
  if (name == "ex2" || name == "ex3") {
    if (!p3 || N != 1) return "needs basis power1d(3) and one state";
    const bool shape = detail::holds_everywhere(xs, [&](const Vector& x) {
      const Vector c = c_at(x), q = Q_at(x).row(0).transpose();
      return c[0] == 0.0 && q[0] == 0.0 && detail::near(c[2], 1.0) && detail::near(q[2], 1.0);
    });
    if (!shape || !detail::drift_free(pf, xs)) return "needs cost c u^2 + u^3 and dynamics q u^2 + u^3";
    return std::nullopt;
  }
  if (name == "corollary3") {
    if (!quad || b.control_dim() != 2 || N != 2) return "needs basis quadratic_diag(2) and two states";
    const bool shape = detail::holds_everywhere(xs, [&](const Vector& x) {
      const Vector c = c_at(x);
      const Matrix Q = Q_at(x);
      return c[0] == 0.0 && c[1] == 0.0 && detail::near(Q(0, 0), 1.0) && detail::near(Q(0, 1), -1.0) &&
             detail::near(Q(0, 3), 1.0) && detail::near(Q(1, 1), 1.0) && detail::near(Q(1, 2), 1.0) &&
             detail::near(Q(1, 3), 1.0);
    });
    if (!shape || !detail::drift_free(pf, xs)) return "needs the corollary's dynamics [[1,-1],[q2,1]] u + [[q1,1],[1,1]] u^2";
    return std::nullopt;
  }
  return "unknown certificate";
}

inline Certificate run_certificate(const std::string& name, const ProblemFile& pf, const std::vector<Vector>& xs) {
  const ProblemSpec& sp = pf.spec;
  const RunConfig& rc = pf.run;
  auto row = [&](const Vector& x) -> Vector { return sp.dynamics_at(x).row(0).transpose(); };
  auto per_state = [&](std::function<Certificate(const Vector&)> f) { return check_over_states(name, xs, f); };

  if (name == "p2") return per_state([&](const Vector& x) { return p2_check(sp.cost_at(x), row(x), sp.K); });
  if (name == "p3_monotone") {
    return per_state([&](const Vector& x) { return p3_monotone_check(sp.cost_at(x), row(x)); });
  }
  if (name == "p3_zero_linear") {
    return per_state([&](const Vector& x) { return p3_zero_linear_check(sp.cost_at(x), row(x), sp.K); });
  }
  if (name == "geom_m1") {
    const GeomOptions g{rc.geom_grid, rc.geom_root_scan};
    return per_state([&](const Vector& x) { return geom_m1_check(sp.cost_at(x), row(x), sp.K, g); });
  }
  if (name == "theorem_sec") return theorem_sec_check(detail::structured(sp), sp.K, xs, rc.cert_u_grid);
  if (name == "ncq_subset") {
    NcqOptions o;
    o.v_samples = rc.ncq_samples;
    o.u_grid_n = rc.cert_u_grid;
    o.seed = rc.solver.seed;
    return per_state(
        [&](const Vector& x) { return ncq_subset_check(sp.cost_at(x), sp.dynamics_at(x), sp.basis, sp.K, o); });
  }

  ExampleParams params;
  ExampleVariant variant;
  auto cost_entry = [&](int i) -> ScalarField { return [&sp, i](const Vector& x) { return sp.cost_at(x)[i]; }; };
  auto dyn_entry = [&](int r, int c) -> ScalarField {
    return [&sp, r, c](const Vector& x) { return sp.dynamics_at(x)(r, c); };
  };
  if (name == "ex1") {
    variant = ExampleVariant::ex1;
    params = {{"c", cost_entry(0)}, {"q", dyn_entry(0, 0)}};
  } else if (name == "ex2") {
    variant = ExampleVariant::ex2;
    params = {{"c", cost_entry(1)}, {"q", dyn_entry(0, 1)}};
  } else if (name == "ex3") {
    variant = ExampleVariant::ex3;
    params = {{"c", cost_entry(1)},
              {"beta", [&sp](const Vector& x) { return sp.cost_at(x)[1] - sp.dynamics_at(x)(0, 1); }}};
  } else if (name == "corollary3") {
    variant = ExampleVariant::corollary3;
    params = {{"q1", dyn_entry(0, 2)}, {"q2", dyn_entry(1, 0)}, {"c1", cost_entry(2)}, {"c2", cost_entry(3)}};
  } else {
    throw InputError("unknown certificate '" + name + "'");
  }
  Certificate cert = example_wrapper_check(variant, params, xs);
  return cert;
}

/// Exit code for a set of requested verdicts: any fail or error gives 1,
/// otherwise any boundary gives 2, otherwise 0.
inline int certify_exit_code(const std::vector<Verdict>& requested) {
  bool boundary = false;
  for (Verdict v : requested) {
    if (v == Verdict::fail || v == Verdict::error) return kExitFail;
    if (v == Verdict::boundary) boundary = true;
  }
  return boundary ? kExitBoundary : kExitOk;
}

inline CommandResult run_certify(ProblemFile pf, const CommandOptions& opt) {
  apply_overrides(pf, opt);
  Stopwatch clock;
  const auto xs = certificate_states(pf);

  std::vector<std::string> applicable;
  json skipped = json::object();
  for (const auto& name : certificate_names()) {
    if (auto why = inapplicable_reason(name, pf, xs)) {
      skipped[name] = *why;
    } else {
      applicable.push_back(name);
    }
  }
  const std::vector<std::string> requested = pf.run.certificates.value_or(applicable);
  for (const auto& name : requested) {
    if (auto why = inapplicable_reason(name, pf, xs)) {
      throw InputError("/run/certificates: '" + name + "' does not apply: " + *why);
    }
  }

  CommandResult out;
  out.report = report_skeleton("certify", pf);
  json certs = json::array();
  json timing = json::object();
  std::vector<Verdict> requested_verdicts;
  for (const auto& name : applicable) {
    Certificate cert;
    try {
      cert = run_certificate(name, pf, xs);
    } catch (const Error& e) {
      cert.statement = name;
      cert.verdict = Verdict::error;
      cert.notes.push_back(e.what());
    }
    timing[name] = clock.lap();
    const bool is_requested = std::find(requested.begin(), requested.end(), name) != requested.end();
    if (is_requested) requested_verdicts.push_back(cert.verdict);
    json j = to_json(cert);
    j["requested"] = is_requested;
    certs.push_back(std::move(j));
  }
  out.exit_code = certify_exit_code(requested_verdicts);
  out.report["certificates"] = std::move(certs);
  out.report["not_applicable"] = std::move(skipped);
  out.report["requested"] = requested;
  out.report["state_samples"] = vectors_to_json(xs);
  out.report["exit_code"] = out.exit_code;
  out.report["timing"] = {{"seconds", timing}, {"threads", opt.threads}};

  std::ostringstream s;
  s << "certify:";
  for (const auto& c : out.report["certificates"]) {
    s << " " << c["statement"].get<std::string>() << "=" << c["verdict"].get<std::string>()
      << (c["requested"].get<bool>() ? "" : "(info)");
  }
  s << " -> exit " << out.exit_code;
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

inline json trajectory_json(const TrajectoryResult& t) {
  double max_dist = 0.0;
  for (double d : t.distance_to_L) max_dist = std::max(max_dist, d);
  return {{"cost", t.cost},
          {"steps", static_cast<int>(t.moments.size())},
          {"best_start", t.best_start},
          {"starts_run", t.starts_run},
          {"iterations", t.iterations},
          {"discarded_starts", t.discarded},
          {"times", t.times},
          {"states", vectors_to_json(t.states)},
          {"moments", vectors_to_json(t.moments)},
          {"distance_to_L", t.distance_to_L},
          {"max_distance_to_L", max_dist},
          {"csv_schema", kTrajectorySchema}};
}

inline json extraction_json(const ExtractionResult& e) {
  return {{"success", e.success},
          {"tolerance", e.tolerance},
          {"controls", vectors_to_json(e.controls)},
          {"distances", e.distances},
          {"offending_steps", e.offending_steps},
          {"relaxed_cost", e.relaxed_cost},
          {"classical_cost", e.success ? json(e.classical_cost) : json(nullptr)}};
}

inline CommandResult run_solve(ProblemFile pf, const CommandOptions& opt) {
  apply_overrides(pf, opt);
  Stopwatch clock;
  CommandResult out;
  out.report = report_skeleton("solve", pf);
  const TrajectoryResult traj = solve_relaxed(pf.spec, pf.run.steps, pf.run.solver);
  const double t_solve = clock.lap();
  const ExtractionResult ex = extract_classical(pf.spec, traj, pf.run.extraction_tol);
  const double t_extract = clock.lap();
  if (opt.csv_path) {
    std::ofstream csv(*opt.csv_path);
    if (!csv) throw InputError(*opt.csv_path + ": cannot open CSV output");
    write_trajectory_csv(csv, pf.spec, traj, ex.success ? &ex : nullptr);
  }
  out.exit_code = ex.success ? kExitOk : kExitExtraction;
  out.report["trajectory"] = trajectory_json(traj);
  out.report["extraction"] = extraction_json(ex);
  out.report["exit_code"] = out.exit_code;
  out.report["timing"] = {{"seconds", {{"solve", t_solve}, {"extract", t_extract}}}, {"threads", opt.threads}};

  std::ostringstream s;
  s << "solve: relaxed cost " << traj.cost;
  if (ex.success) {
    s << ", extraction ok, classical cost " << ex.classical_cost;
  } else {
    s << ", extraction failed on " << ex.offending_steps.size() << " of " << traj.moments.size() << " steps";
  }
  s << " -> exit " << out.exit_code;
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------------------
// Compare
// ---------------------------------------------------------------------------

/// Random piecewise-constant classical controls, each simulated through the
/// original dynamics and compared with the relaxed optimum.
inline json relaxation_inequality_arm(const ProblemSpec& sp, const TrajectoryResult& traj, int steps, int trials,
                                      std::uint64_t seed, int& violations) {
  std::mt19937_64 rng(seed ^ 0x5eedull);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (int i = 0; i < sp.K.dim(); ++i) dist.emplace_back(sp.K.lower(i), sp.K.upper(i));
  violations = 0;
  int diverged = 0;
  double best = std::numeric_limits<double>::infinity();
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    std::vector<Vector> controls(steps, Vector(sp.K.dim()));
    for (auto& u : controls) {
      for (int i = 0; i < sp.K.dim(); ++i) u[i] = dist[i](rng);
    }
    double cost;
    try {
      cost = integrate_classical(sp, controls).cost();
    } catch (const DivergenceError&) {
      ++diverged;
      continue;
    }
    best = std::min(best, cost);
    worst_excess = std::max(worst_excess, traj.cost - cost);
    if (cost < traj.cost - 1e-6) ++violations;
  }
  return {{"trials", trials},
          {"diverged", diverged},
          {"violations", violations},
          {"best_classical_cost", std::isfinite(best) ? json(best) : json(nullptr)},
          {"max_relaxed_minus_classical", std::isfinite(worst_excess) ? json(worst_excess) : json(nullptr)}};
}

inline CommandResult run_compare(ProblemFile pf, const CommandOptions& opt) {
  apply_overrides(pf, opt);
  Stopwatch clock;
  CommandResult out;
  out.report = report_skeleton("compare", pf);
  json timing = json::object();
  const ProblemSpec& sp = pf.spec;

  const TrajectoryResult traj = solve_relaxed(sp, pf.run.steps, pf.run.solver);
  timing["solve"] = clock.lap();
  out.report["relaxed"] = {{"cost", traj.cost},
                           {"starts_run", traj.starts_run},
                           {"best_start", traj.best_start},
                           {"max_distance_to_L", trajectory_json(traj)["max_distance_to_L"]}};

  json dp_arm;
  if (sp.state_dim() == 1 && sp.basis.control_dim() == 1) {
    DPConfig cfg = pf.run.dp;
    cfg.steps = pf.run.steps;
    try {
      const DPResult dp = dp_value_original(sp, cfg);
      dp_arm = {{"status", "ran"},
                {"value", dp.value},
                {"grid_value", dp.grid_value},
                {"gap", dp.value - traj.cost},
                {"state_range", {dp.state_range.first, dp.state_range.second}},
                {"state_points", cfg.state_points},
                {"control_points", cfg.control_points}};
    } catch (const Error& e) {
      dp_arm = {{"status", "failed"}, {"note", e.what()}};
    }
  } else {
    dp_arm = {{"status", "skipped"}, {"note", "dynamic programming oracle needs one state and a scalar control"}};
  }
  timing["dp"] = clock.lap();
  out.report["dp"] = dp_arm;

  json probe_arm;
  if (sp.state_dim() == 1 && sp.basis.kind() == BasisKind::power1d) {
    try {
      const ProbeResult p = orientor_convexity_probe(sp, sp.x0, pf.run.probe_grid);
      probe_arm = {{"status", "ran"},
                   {"verdict", p.convex ? "convex" : "nonconvex"},
                   {"x", to_std(sp.x0)},
                   {"xi_range", {p.xi_lower, p.xi_upper}},
                   {"min_second_difference", p.min_second_difference}};
      if (p.witness_xi) {
        probe_arm["witness"] = {{"xi", *p.witness_xi}, {"boundary", *p.witness_value}};
      }
    } catch (const Error& e) {
      probe_arm = {{"status", "failed"}, {"note", e.what()}};
    }
  } else {
    probe_arm = {{"status", "skipped"}, {"note", "convexity probe needs one state and a power1d basis"}};
  }
  timing["probe"] = clock.lap();
  out.report["probe"] = probe_arm;

  int violations = 0;
  out.report["relaxation_inequality"] = relaxation_inequality_arm(sp, traj, pf.run.steps, pf.run.relaxation_trials,
                                                                  pf.run.solver.seed, violations);
  timing["relaxation_inequality"] = clock.lap();

  out.exit_code = violations == 0 ? kExitOk : kExitFail;
  out.report["exit_code"] = out.exit_code;
  out.report["timing"] = {{"seconds", timing}, {"threads", opt.threads}};

  std::ostringstream s;
  s << "compare: relaxed " << traj.cost;
  if (dp_arm["status"] == "ran") {
    s << ", dp " << dp_arm["value"].get<double>() << ", gap " << dp_arm["gap"].get<double>();
  } else {
    s << ", dp " << dp_arm["status"].get<std::string>();
  }
  if (probe_arm["status"] == "ran") {
    s << ", probe " << probe_arm["verdict"].get<std::string>();
  } else {
    s << ", probe " << probe_arm["status"].get<std::string>();
  }
  s << ", relaxation violations " << violations << " -> exit " << out.exit_code;
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch with the exit-code contract
// ---------------------------------------------------------------------------

/// Loads the file, runs the command, and maps every error to its exit code.
/// The returned report is always filled, even on failure.
inline CommandResult run_command(const std::string& command, const std::string& path, const CommandOptions& opt) {
  CommandResult out;
  try {
    ProblemFile pf = load_problem(path);
    if (command == "certify") return run_certify(std::move(pf), opt);
    if (command == "solve") return run_solve(std::move(pf), opt);
    if (command == "compare") return run_compare(std::move(pf), opt);
    throw InputError("unknown command '" + command + "'");
  } catch (const DivergenceError& e) {
    out.exit_code = kExitDivergence;
    out.report = error_report(command, "divergence", e.what());
  } catch (const InputError& e) {
    out.exit_code = kExitInput;
    out.report = error_report(command, "input", e.what());
  } catch (const DimensionError& e) {
    out.exit_code = kExitInput;
    out.report = error_report(command, "input", e.what());
  } catch (const InfeasibleError& e) {
    out.exit_code = kExitInput;
    out.report = error_report(command, "input", e.what());
  } catch (const Error& e) {
    out.exit_code = kExitFail;
    out.report = error_report(command, "error", e.what());
  }
  out.report["exit_code"] = out.exit_code;
  out.summary = command + ": " + out.report["error"]["message"].get<std::string>() + " -> exit " +
                std::to_string(out.exit_code);
  return out;
}

/// The report without its timing block, for determinism comparisons.
inline std::string stable_dump(json report) {
  report.erase("timing");
  return report.dump(2);
}

}  // namespace momentcert::app
