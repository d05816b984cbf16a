#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "momentcert/basis.hpp"
#include "momentcert/detail/scalar.hpp"

namespace momentcert {

/// Margin for every strict inequality. Quantities inside (-margin, margin)
/// give a boundary verdict, never a pass.
inline constexpr double kStrictMargin = 1e-12;

enum class Verdict { pass, fail, boundary, error };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::boundary: return "boundary";
    case Verdict::error: return "error";
  }
  return "error";
}

/// Ordering used when combining verdicts: error > fail > boundary > pass.
inline Verdict worst(Verdict a, Verdict b) {
  auto rank = [](Verdict v) {
    switch (v) {
      case Verdict::pass: return 0;
      case Verdict::boundary: return 1;
      case Verdict::fail: return 2;
      case Verdict::error: return 3;
    }
    return 3;
  };
  return rank(a) >= rank(b) ? a : b;
}

struct Witness {
  std::string description;
  std::map<std::string, std::vector<double>> values;
};

struct Certificate {
  std::string statement;
  Verdict verdict = Verdict::error;
  std::map<std::string, double> quantities;
  std::optional<Witness> witness;
  std::map<std::string, long long> samples;
  std::vector<std::string> notes;

  bool passed() const { return verdict == Verdict::pass; }
};

/// pass if q < -margin, boundary if |q| <= margin, fail otherwise.
inline Verdict require_negative(double q, double margin = kStrictMargin) {
  if (!std::isfinite(q)) return Verdict::fail;
  if (q < -margin) return Verdict::pass;
  if (q <= margin) return Verdict::boundary;
  return Verdict::fail;
}

inline Verdict require_positive(double q, double margin = kStrictMargin) { return require_negative(-q, margin); }

// ---------------------------------------------------------------------------
// N = n = 1, p = 2
// ---------------------------------------------------------------------------

/// Duality conditions for phi(t) = (t, t^2) on K = [a1, a2]:
///   1. q1 + q2 (a1 + a2) = 0 and det[c; q] != 0, or
///   2. (q1 + q2 (a1 + a2)) det[c; q] < 0.
/// On failure the witness is the multiplier eta at which (c + eta q).phi is
/// concave and symmetric about the midpoint, with minimizers a1 and a2.
inline Certificate p2_check(const Vector& c, const Vector& q, const CompactControlSet& K) {
  require_dim(c.size(), 2, "p2_check c");
  require_dim(q.size(), 2, "p2_check q");
  require_dim(K.dim(), 1, "p2_check K");
  const double a1 = K.lower(0), a2 = K.upper(0);
  const double sum = a1 + a2;
  const double lin = q[0] + q[1] * sum;
  const double det = c[0] * q[1] - c[1] * q[0];

  Certificate cert;
  cert.statement = "p2";
  cert.quantities = {{"q1+q2(a1+a2)", lin}, {"det", det}, {"product", lin * det}};

  if (std::abs(lin) <= kStrictMargin) {
    cert.quantities["condition"] = 1;
    if (std::abs(det) > kStrictMargin) {
      cert.verdict = Verdict::pass;
    } else {
      cert.verdict = Verdict::boundary;
      cert.witness = Witness{"q1+q2(a1+a2) = 0 and det = 0 within margin: c and q are parallel", {}};
    }
    return cert;
  }
  cert.quantities["condition"] = 2;
  cert.verdict = require_negative(lin * det);
  if (cert.verdict != Verdict::pass) {
    const double eta = -(c[0] + sum * c[1]) / lin;
    cert.witness = Witness{cert.verdict == Verdict::fail
                               ? "(c + eta q).phi is concave and symmetric on K, minimized at both endpoints"
                               : "(q1+q2(a1+a2)) det = 0 within margin",
                           {{"eta", {eta}}, {"u", {a1, a2}}, {"c2+eta*q2", {c[1] + eta * q[1]}}}};
  }
  return cert;
}

// ---------------------------------------------------------------------------
// N = n = 1, p = 3
// ---------------------------------------------------------------------------

inline constexpr const char* kMonotoneVacuityNote =
    "vacuity flag: the two strict inequalities require (c2+eta q2)^2 < 3 (c1+eta q1)(c3+eta q3) for every "
    "eta, i.e. the whole line c + eta q inside the open cone {u2^2 < 3 u1 u3}; no line fits, so no (c, q) "
    "with q != 0 can pass (c = q gives exact equality)";

/// Monotone-cubic conditions: q2^2 - 3 q1 q3 < 0 and
/// (2 c2 q2 - 3 c1 q3 - 3 q1 c3)^2 - 4 (c2^2 - 3 c1 c3)(q2^2 - 3 q1 q3) < 0.
inline Certificate p3_monotone_check(const Vector& c, const Vector& q) {
  require_dim(c.size(), 3, "p3_monotone_check c");
  require_dim(q.size(), 3, "p3_monotone_check q");
  // D(eta) = A eta^2 + B eta + C is the discriminant of g'(t) for g = (c + eta q).phi.
  const double A = q[1] * q[1] - 3.0 * q[0] * q[2];
  const double B = 2.0 * c[1] * q[1] - 3.0 * c[0] * q[2] - 3.0 * q[0] * c[2];
  const double C = c[1] * c[1] - 3.0 * c[0] * c[2];
  const double disc = B * B - 4.0 * C * A;

  Certificate cert;
  cert.statement = "p3_monotone";
  cert.quantities = {{"q2^2-3q1q3", A}, {"discriminant", disc}};
  cert.verdict = worst(require_negative(A), require_negative(disc));
  cert.notes.push_back(kMonotoneVacuityNote);
  if (cert.verdict != Verdict::pass) {
    // A multiplier where g' has a real root (D(eta) >= 0).
    double eta = 0.0;
    if (A < 0.0) {
      eta = -B / (2.0 * A);
    } else {
      double best = C;
      for (double e : {1.0, -1.0, 10.0, -10.0, 100.0, -100.0, 1e3, -1e3}) {
        const double d = A * e * e + B * e + C;
        if (d > best) {
          best = d;
          eta = e;
        }
      }
    }
    cert.witness = Witness{"multiplier eta where (c + eta q).phi is not strictly monotone",
                           {{"eta", {eta}}, {"D(eta)", {A * eta * eta + B * eta + C}}}};
  }
  return cert;
}

/// Zero-linear-component conditions for c = (0, c2, c3), q = (0, q2, q3):
///   a1 > 0: -q2/q3 < 0 and c2 - c3 q2/q3 < 0
///   a2 < 0: -q2/q3 > 0 and c2 - c3 q2/q3 < 0
inline Certificate p3_zero_linear_check(const Vector& c, const Vector& q, const CompactControlSet& K) {
  require_dim(c.size(), 3, "p3_zero_linear_check c");
  require_dim(q.size(), 3, "p3_zero_linear_check q");
  require_dim(K.dim(), 1, "p3_zero_linear_check K");
  if (std::abs(c[0]) > kStrictMargin || std::abs(q[0]) > kStrictMargin) {
    throw StructuralError("p3_zero_linear_check needs c1 = q1 = 0");
  }
  if (K.lower(0) <= 0.0 && K.upper(0) >= 0.0) {
    throw StructuralError("p3_zero_linear_check needs K on one side of 0");
  }
  if (q[2] == 0.0) throw StructuralError("p3_zero_linear_check needs q3 != 0");

  const double slope = -q[1] / q[2];
  const double along = c[1] + c[2] * slope;
  Certificate cert;
  cert.statement = "p3_zero_linear";
  cert.quantities = {{"-q2/q3", slope}, {"c2-c3*q2/q3", along}};
  const bool positive_side = K.lower(0) > 0.0;
  cert.quantities["side"] = positive_side ? 1.0 : -1.0;
  const Verdict first = positive_side ? require_negative(slope) : require_positive(slope);
  const Verdict second = require_negative(along);
  cert.verdict = worst(first, second);
  if (cert.verdict != Verdict::pass) {
    Witness w;
    w.description = first != Verdict::pass
                        ? std::string("-q2/q3 has the wrong sign for this side of 0")
                        : std::string("(c2, c3).(1, -q2/q3) is not strictly negative");
    // At eta = -c3/q3 the cubic term vanishes and g = (c2 - c3 q2/q3) t^2.
    w.values = {{"eta", {-c[2] / q[2]}}, {"c2-c3*q2/q3", {along}}, {"-q2/q3", {slope}}};
    cert.witness = std::move(w);
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Geometric route for p = 3, K in (0, inf)
// ---------------------------------------------------------------------------

inline Eigen::Vector3d phi3(double t) { return {t, t * t, t * t * t}; }
inline Eigen::Vector3d phi3_prime(double t) { return {1.0, 2.0 * t, 3.0 * t * t}; }

/// Normal of the cubic moment curve, (phi' x phi'') x phi'. Equals
/// 2 (-9t^3 - 2t, 1 - 9t^4, 6t^3 + 3t).
inline Eigen::Vector3d cubic_curve_normal(double t) {
  const Eigen::Vector3d d1 = phi3_prime(t);
  const Eigen::Vector3d d2(0.0, 2.0, 6.0 * t);
  return d1.cross(d2).cross(d1);
}

struct GeomOptions {
  int grid_n = 200;       // t and s grid for the sign-invariance scan
  int root_scan_n = 1000; // scan for the chord condition roots
};

/// Membership in the set M1:
///  (i)  (phi'(t) x (c x q)).(phi(s) - phi(t)) keeps one strict sign over
///       all grid pairs s != t;
///  (ii) if (phi(a1) + phi(a2) - 2 phi(a)).q = 0 has a unique root a in K,
///       then (phi(a1) + phi(a2) - 2 phi(a)).c > 0 there.
/// Several roots give a fail: M1 presupposes a unique a.
inline Certificate geom_m1_check(const Vector& c, const Vector& q, const CompactControlSet& K,
                                 const GeomOptions& opt = {}) {
  require_dim(c.size(), 3, "geom_m1_check c");
  require_dim(q.size(), 3, "geom_m1_check q");
  require_dim(K.dim(), 1, "geom_m1_check K");
  const double a1 = K.lower(0), a2 = K.upper(0);
  if (!(a1 > 0.0)) throw StructuralError("geom_m1_check needs a1 > 0");

  Certificate cert;
  cert.statement = "geom_m1";
  cert.samples = {{"pair_grid", opt.grid_n}, {"root_scan", opt.root_scan_n}};

  const Eigen::Vector3d cv(c[0], c[1], c[2]);
  const Eigen::Vector3d qv(q[0], q[1], q[2]);
  const Eigen::Vector3d field = cv.cross(qv);
  cert.quantities["|c x q|"] = field.norm();
  if (field.norm() <= kStrictMargin) {
    cert.verdict = Verdict::fail;
    cert.witness = Witness{"zero field: c x q = 0", {{"c x q", {field[0], field[1], field[2]}}}};
    return cert;
  }

  // (i) sign invariance
  const auto grid = linspace(a1, a2, opt.grid_n);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double t_lo = 0, s_lo = 0, t_hi = 0, s_hi = 0;
  for (double t : grid) {
    const Eigen::Vector3d w = phi3_prime(t).cross(field);
    const Eigen::Vector3d pt = phi3(t);
    for (double s : grid) {
      if (s == t) continue;
      const double val = w.dot(phi3(s) - pt);
      if (val < lo) {
        lo = val;
        t_lo = t;
        s_lo = s;
      }
      if (val > hi) {
        hi = val;
        t_hi = t;
        s_hi = s;
      }
    }
  }
  cert.quantities["sign_scan_min"] = lo;
  cert.quantities["sign_scan_max"] = hi;
  Verdict sign_verdict;
  if (lo > kStrictMargin || hi < -kStrictMargin) {
    sign_verdict = Verdict::pass;
  } else if ((lo < -kStrictMargin && hi > kStrictMargin)) {
    sign_verdict = Verdict::fail;
    cert.witness = Witness{"sign change of (phi'(t) x (c x q)).(phi(s) - phi(t))",
                           {{"t", {t_lo, t_hi}}, {"s", {s_lo, s_hi}}, {"value", {lo, hi}}}};
  } else {
    sign_verdict = Verdict::boundary;
    cert.witness = Witness{"sign-invariance quantity reaches 0 within margin",
                           {{"t", {t_lo, t_hi}}, {"s", {s_lo, s_hi}}, {"value", {lo, hi}}}};
  }
  cert.quantities["sign_invariance"] = sign_verdict == Verdict::pass ? 1.0 : 0.0;

  // (ii) chord condition
  const Eigen::Vector3d ends = phi3(a1) + phi3(a2);
  auto chord_q = [&](double a) { return (ends - 2.0 * phi3(a)).dot(qv); };
  auto chord_c = [&](double a) { return (ends - 2.0 * phi3(a)).dot(cv); };
  const auto roots = detail::scan_roots(chord_q, a1, a2, opt.root_scan_n);
  cert.quantities["chord_roots"] = static_cast<double>(roots.size());
  Verdict chord_verdict = Verdict::pass;
  if (roots.size() == 1) {
    const double value = chord_c(roots[0]);
    cert.quantities["root_a"] = roots[0];
    cert.quantities["chord_c_at_root"] = value;
    chord_verdict = require_positive(value);
    if (chord_verdict != Verdict::pass && sign_verdict == Verdict::pass) {
      cert.witness = Witness{"(phi(a1)+phi(a2)-2phi(a)).c is not strictly positive at the unique root",
                             {{"a", {roots[0]}}, {"value", {value}}}};
    }
  } else if (roots.size() > 1) {
    chord_verdict = Verdict::fail;
    if (sign_verdict == Verdict::pass) {
      cert.witness = Witness{"chord condition has several roots; unique-root hypothesis not met", {{"a", roots}}};
    }
    const bool endpoints = std::abs(roots.front() - a1) <= 1e-9 && std::abs(roots.back() - a2) <= 1e-9;
    if (endpoints) {
      cert.notes.push_back("roots at a = a1 and b = a2 (two-root branch); not certified automatically");
    }
  } else {
    cert.notes.push_back("chord condition has no root in K; second requirement holds vacuously");
  }
  cert.verdict = worst(sign_verdict, chord_verdict);
  return cert;
}

// ---------------------------------------------------------------------------
// Structured multi-dimensional case
// ---------------------------------------------------------------------------

/// Dynamics x' = Q0(x) + Q1(x) u + Q2(x) u^2 with cost c1(x).u + c2(x).u^2,
/// u in a box of R^n and N = n.
struct StructuredProblem {
  int n = 0;
  MatrixField Q1;
  MatrixField Q2;
  VectorField Q0;  // optional
  VectorField c1;
  VectorField c2;

  Matrix Q1_at(const Vector& x) const {
    Matrix m = Q1(x);
    if (m.rows() != n || m.cols() != n) throw DimensionError("Q1 must be n x n");
    return m;
  }

  Matrix Q2_at(const Vector& x) const {
    Matrix m = Q2(x);
    if (m.rows() != n || m.cols() != n) throw DimensionError("Q2 must be n x n");
    return m;
  }

  /// Throws StructuralError when Q1(x) is singular.
  Matrix D(const Vector& x) const {
    const Matrix q1 = Q1_at(x);
    const Vector rn = q1.rowwise().norm();
    if (rn.minCoeff() == 0.0) throw StructuralError("Q1 has a zero row (singular)");
    const Matrix scaled = rn.cwiseInverse().asDiagonal() * q1;
    Eigen::FullPivLU<Matrix> lu(scaled);
    if (!lu.isInvertible() || std::abs(lu.determinant()) <= 1e-12) {
      throw StructuralError("Q1 is singular at a sampled state");
    }
    return -q1.fullPivLu().solve(Q2_at(x));
  }

  /// E(x) = c1 D + c2, as a column vector.
  Vector E(const Vector& x) const {
    const Vector a = c1(x), b = c2(x);
    require_dim(a.size(), n, "c1");
    require_dim(b.size(), n, "c2");
    return D(x).transpose() * a + b;
  }

  /// U(m, x) = 2 diag(m_1..m_n) D - id, where m_i = u_i.
  static Matrix U(const Vector& u, const Matrix& D) {
    return 2.0 * u.asDiagonal() * D - Matrix::Identity(D.rows(), D.cols());
  }

  /// Full cost vector c = (c1, c2) in R^{2n}.
  Vector cost(const Vector& x) const {
    Vector out(2 * n);
    out << c1(x), c2(x);
    return out;
  }

  /// Full dynamics matrix Q = [Q1 Q2], n x 2n.
  Matrix dynamics(const Vector& x) const {
    Matrix out(n, 2 * n);
    out << Q1_at(x), Q2_at(x);
    return out;
  }
};

/// |det| of U after scaling each row to unit norm.
inline double scaled_abs_det(const Matrix& U) {
  const Vector rn = U.rowwise().norm();
  if (rn.minCoeff() == 0.0) return 0.0;
  return std::abs((rn.cwiseInverse().asDiagonal() * U).determinant());
}

/// U(phi(u), x) nonsingular and U^{-T} E < 0 componentwise at every sampled
/// state and every u on the grid over K.
inline Certificate theorem_sec_check(const StructuredProblem& sp, const CompactControlSet& K,
                                     const std::vector<Vector>& x_samples, int u_grid_n = 101) {
  require_dim(K.dim(), sp.n, "theorem_sec_check K");
  Certificate cert;
  cert.statement = "theorem_sec";
  const auto ugrid = control_grid(K, u_grid_n);
  cert.samples = {{"x_samples", static_cast<long long>(x_samples.size())},
                  {"u_grid_per_dim", u_grid_n},
                  {"u_points", static_cast<long long>(ugrid.size())}};
  double worst_component = -std::numeric_limits<double>::infinity();
  double min_det = std::numeric_limits<double>::infinity();
  Verdict verdict = Verdict::pass;
  for (const auto& x : x_samples) {
    const Matrix D = sp.D(x);
    const Vector E = sp.E(x);
    for (const auto& u : ugrid) {
      const Matrix U = StructuredProblem::U(u, D);
      const double det = scaled_abs_det(U);
      min_det = std::min(min_det, det);
      if (det <= 1e-10) {
        cert.verdict = Verdict::fail;
        cert.quantities = {{"min_scaled_det", det}};
        cert.witness = Witness{"U(phi(u), x) is singular", {{"x", to_std(x)}, {"u", to_std(u)}}};
        return cert;
      }
      const Vector y = U.transpose().fullPivLu().solve(E);
      for (int i = 0; i < y.size(); ++i) {
        worst_component = std::max(worst_component, y[i]);
        const Verdict v = require_negative(y[i]);
        if (v != Verdict::pass && worst(verdict, v) != verdict) {
          verdict = worst(verdict, v);
          cert.witness = Witness{v == Verdict::fail ? "component of U^{-T} E is not negative"
                                                    : "component of U^{-T} E is 0 within margin",
                                 {{"x", to_std(x)}, {"u", to_std(u)}, {"component", {static_cast<double>(i)}},
                                  {"U^{-T}E", to_std(y)}}};
        }
      }
    }
  }
  cert.verdict = verdict;
  cert.quantities = {{"max_component", worst_component}, {"min_scaled_det", min_det}};
  return cert;
}

struct NcqOptions {
  int v_samples = 10000;
  int u_grid_n = 101;
  std::uint64_t seed = 0;
};

/// Condition N(c, Q) subset of N(K, phi): every direction v with Qv = 0 and
/// c.v <= 0 must, at each u in the grid, either satisfy grad Psi(phi(u)) v = 0
/// or have a strictly positive component of grad Psi(phi(u)) v.
inline Certificate ncq_subset_check(const Vector& c, const Matrix& Q, const ControlBasis& basis,
                                    const CompactControlSet& K, const NcqOptions& opt = {}) {
  const int s = basis.moment_dim();
  require_dim(c.size(), s, "ncq_subset_check c");
  require_dim(Q.cols(), s, "ncq_subset_check Q");
  require_dim(K.dim(), basis.control_dim(), "ncq_subset_check K");
  if (!psi_convex_on(basis, K)) {
    throw StructuralError("Psi is not convex on K for " + basis.name() + " (power1d(3) needs a1 > 0)");
  }
  Certificate cert;
  cert.statement = "ncq_subset";
  const auto ugrid = control_grid(K, opt.u_grid_n);
  cert.samples = {{"v_samples", opt.v_samples},
                  {"u_grid_per_dim", opt.u_grid_n},
                  {"u_points", static_cast<long long>(ugrid.size())},
                  {"seed", static_cast<long long>(opt.seed)}};

  Eigen::JacobiSVD<Matrix> svd(Q, Eigen::ComputeFullV);
  const double scale = std::max(1.0, svd.singularValues().size() ? svd.singularValues()[0] : 0.0);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) rank += svd.singularValues()[i] > 1e-12 * scale ? 1 : 0;
  const int k = s - rank;
  cert.quantities["null_dim"] = k;
  if (k == 0) {
    cert.verdict = Verdict::pass;
    cert.notes.push_back("vacuous: Q has full column rank, so N(c, Q) = {0}");
    return cert;
  }
  const Matrix Z = svd.matrixV().rightCols(k);

  // All gradients stacked so each direction costs one matrix-vector product.
  const int r = basis.constraint_dim();
  Matrix grads(r * static_cast<Eigen::Index>(ugrid.size()), s);
  for (std::size_t j = 0; j < ugrid.size(); ++j) {
    grads.middleRows(r * static_cast<Eigen::Index>(j), r) = psi_grad(basis, phi_eval(basis, ugrid[j]));
  }

  std::vector<Vector> directions;
  for (int i = 0; i < k; ++i) {
    directions.push_back(Z.col(i));
    directions.push_back(-Z.col(i));
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < opt.v_samples; ++i) {
    Vector g(k);
    for (auto& v : g) v = normal(rng);
    const double nrm = g.norm();
    if (nrm == 0.0) continue;
    const Vector v = Z * (g / nrm);
    directions.push_back(v);
    directions.push_back(-v);
  }

  long long tested = 0;
  double min_best_component = std::numeric_limits<double>::infinity();
  for (const auto& v : directions) {
    if (c.dot(v) > kStrictMargin) continue;
    ++tested;
    const Vector all = grads * v;
    for (std::size_t j = 0; j < ugrid.size(); ++j) {
      const auto gv = all.segment(r * static_cast<Eigen::Index>(j), r);
      if (gv.cwiseAbs().maxCoeff() <= 1e-10) continue;
      const double best = gv.maxCoeff();
      if (best > kStrictMargin) {
        min_best_component = std::min(min_best_component, best);
        continue;
      }
      cert.verdict = Verdict::fail;
      cert.samples["directions_tested"] = tested;
      cert.witness = Witness{"direction v in N(c, Q) with grad Psi(phi(u)) v nonzero and <= 0",
                             {{"v", to_std(v)}, {"u", to_std(ugrid[j])}, {"gradPsi*v", to_std(Vector(gv))}}};
      return cert;
    }
  }
  cert.verdict = Verdict::pass;
  cert.samples["directions_tested"] = tested;
  cert.quantities["min_ascent_component"] = min_best_component;
  return cert;
}

// ---------------------------------------------------------------------------
// Worked-example wrappers
// ---------------------------------------------------------------------------

enum class ExampleVariant { ex1, ex2, ex3, corollary3 };

inline const char* to_string(ExampleVariant v) {
  switch (v) {
    case ExampleVariant::ex1: return "ex1";
    case ExampleVariant::ex2: return "ex2";
    case ExampleVariant::ex3: return "ex3";
    case ExampleVariant::corollary3: return "corollary3";
  }
  return "ex1";
}

/// Named scalar coefficient functions of the state:
///   ex1, ex2: "c", "q";  ex3: "c", "beta";  corollary3: "q1", "q2", "c1", "c2".
using ExampleParams = std::map<std::string, ScalarField>;

/// Lower and upper bounds on c1 in the Corollary 3 family.
inline std::pair<double, double> corollary3_c1_bounds(double q1, double q2, double c2) {
  const double lower = 0.5 * (q1 + 1.0) * c2;
  const double upper = (2.0 * q1 * q1 + q1 * (q2 + 1.0) - q2 - 3.0) / (4.0 * (q1 - 1.0)) * c2;
  return {lower, upper};
}

/// The explicit sufficient conditions of the worked examples, checked
/// strictly at every sampled state.
///   ex1: q (q - c) > 0
///   ex2: c < q and q > 0
///   ex3: beta < min{0, c}
///   corollary3: q1 in (1/3, 1), q2 in (-1, 1), c1, c2 > 0 and the two-sided
///               bound on c1
inline Certificate example_wrapper_check(ExampleVariant variant, const ExampleParams& params,
                                         const std::vector<Vector>& x_samples) {
  auto get = [&](const char* name) -> const ScalarField& {
    auto it = params.find(name);
    if (it == params.end() || !it->second) {
      throw InputError(std::string("example_wrapper_check: missing parameter '") + name + "'");
    }
    return it->second;
  };
  Certificate cert;
  cert.statement = to_string(variant);
  cert.samples = {{"x_samples", static_cast<long long>(x_samples.size())}};
  cert.verdict = Verdict::pass;
  double min_slack = std::numeric_limits<double>::infinity();

  auto check = [&](const Vector& x, const std::string& name, double slack) {
    min_slack = std::min(min_slack, slack);
    const Verdict v = require_positive(slack);
    if (v != Verdict::pass && worst(cert.verdict, v) != cert.verdict) {
      cert.verdict = worst(cert.verdict, v);
      cert.witness = Witness{name + (v == Verdict::fail ? " violated" : " holds only with equality"),
                             {{"x", to_std(x)}, {name, {slack}}}};
    }
  };

  for (const auto& x : x_samples) {
    switch (variant) {
      case ExampleVariant::ex1: {
        const double c = get("c")(x), q = get("q")(x);
        check(x, "q(q-c)", q * (q - c));
        break;
      }
      case ExampleVariant::ex2: {
        const double c = get("c")(x), q = get("q")(x);
        check(x, "q-c", q - c);
        check(x, "q", q);
        break;
      }
      case ExampleVariant::ex3: {
        const double c = get("c")(x), beta = get("beta")(x);
        check(x, "min{0,c}-beta", std::min(0.0, c) - beta);
        break;
      }
      case ExampleVariant::corollary3: {
        const double q1 = get("q1")(x), q2 = get("q2")(x), c1 = get("c1")(x), c2 = get("c2")(x);
        check(x, "q1-1/3", q1 - 1.0 / 3.0);
        check(x, "1-q1", 1.0 - q1);
        check(x, "q2+1", q2 + 1.0);
        check(x, "1-q2", 1.0 - q2);
        check(x, "c1", c1);
        check(x, "c2", c2);
        const auto [lower, upper] = corollary3_c1_bounds(q1, q2, c2);
        check(x, "c1-lower", c1 - lower);
        check(x, "upper-c1", upper - c1);
        cert.quantities["c1_lower_bound"] = lower;
        cert.quantities["c1_upper_bound"] = upper;
        break;
      }
    }
  }
  cert.quantities["min_slack"] = min_slack;
  return cert;
}

/// Runs a per-state certificate at every sampled state and keeps the worst
/// verdict, tagging the witness with the state where it occurred.
inline Certificate check_over_states(const std::string& statement, const std::vector<Vector>& x_samples,
                                     const std::function<Certificate(const Vector&)>& per_state) {
  Certificate out;
  out.statement = statement;
  out.verdict = Verdict::pass;
  out.samples["x_samples"] = static_cast<long long>(x_samples.size());
  for (const auto& x : x_samples) {
    Certificate c = per_state(x);
    for (const auto& [k, v] : c.samples) out.samples[k] = v;
    for (const auto& note : c.notes) {
      if (std::find(out.notes.begin(), out.notes.end(), note) == out.notes.end()) out.notes.push_back(note);
    }
    if (worst(out.verdict, c.verdict) != out.verdict || out.quantities.empty()) {
      if (worst(out.verdict, c.verdict) != out.verdict) {
        out.witness = c.witness;
        if (out.witness) out.witness->values["x"] = to_std(x);
      }
      out.verdict = worst(out.verdict, c.verdict);
      out.quantities = c.quantities;
    }
  }
  return out;
}

}  // namespace momentcert
