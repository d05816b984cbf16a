#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "momentcert/basis.hpp"
#include "momentcert/detail/hull.hpp"
#include "momentcert/detail/scalar.hpp"
#include "momentcert/measure.hpp"

namespace momentcert {

inline constexpr double kMembershipTolerance = 1e-9;
inline constexpr int kDefaultHullSamples = 2000;
inline constexpr int kDistanceGrid = 2001;

/// How lambda_contains decides membership.
///   automatic:   closed form where one exists, hull sampling otherwise
///   closed_form: (a) p = 2 inequalities, (b) p = 3 localized moment
///                matrices, (c) coordinate pairs for quadratic_diag
///   hull:        (d) convex hull of phi on a uniform grid, by LP
enum class MembershipMode { automatic, closed_form, hull };

/// Uniform sample of the moment curve over K. For n > 1 the grid has
/// ceil(count^(1/n)) nodes per coordinate.
inline std::vector<Vector> curve_parameters(const CompactControlSet& K, int sample_count) {
  const int n = K.dim();
  const int per_dim = n == 1 ? sample_count
                             : static_cast<int>(std::ceil(std::pow(static_cast<double>(sample_count), 1.0 / n)));
  return control_grid(K, std::max(per_dim, 2));
}

inline std::vector<MomentVector> curve_samples(const ControlBasis& basis, const std::vector<Vector>& params) {
  std::vector<MomentVector> pts;
  pts.reserve(params.size());
  for (const auto& u : params) pts.push_back(phi_eval(basis, u));
  return pts;
}

namespace detail {

/// Signed slack of the p = 2 moment set on [a, b]: nonnegative iff
/// a <= m1 <= b and m1^2 <= m2 <= (a+b) m1 - ab.
inline double quadratic_pair_margin(double m1, double m2, double a, double b) {
  return std::min({m1 - a, b - m1, m2 - m1 * m1, (a + b) * m1 - a * b - m2});
}

inline double min_eig_2x2(double p, double q, double r) {
  const double mean = 0.5 * (p + r);
  const double half = 0.5 * (p - r);
  return mean - std::sqrt(half * half + q * q);
}

/// Smallest eigenvalue over the two localized 2x2 moment matrices of the
/// truncated cubic moment problem on [a, b]. Nonnegative iff m is in Lambda.
inline double cubic_moment_margin(const MomentVector& m, double a, double b) {
  const double lower = min_eig_2x2(m[0] - a, m[1] - a * m[0], m[2] - a * m[1]);
  const double upper = min_eig_2x2(b - m[0], b * m[0] - m[1], b * m[1] - m[2]);
  return std::min(lower, upper);
}

}  // namespace detail

/// Whether the analytic membership test is offered for this basis and K.
inline bool has_closed_form_membership(const ControlBasis& basis, const CompactControlSet& K) {
  if (basis.kind() == BasisKind::power1d && basis.degree() == 3) return !K.straddles_zero();
  return true;
}

/// Signed closed-form margin: >= 0 inside Lambda, < 0 outside. Units are
/// those of the underlying inequality, so it is a band indicator, not a
/// Euclidean distance.
inline double closed_form_margin(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m) {
  require_dim(m.size(), basis.moment_dim(), "moment vector");
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (!has_closed_form_membership(basis, K)) {
    throw InputError("closed-form membership for power1d(3) needs K on one side of 0");
  }
  if (basis.kind() == BasisKind::power1d) {
    if (basis.degree() == 2) return detail::quadratic_pair_margin(m[0], m[1], K.lower(0), K.upper(0));
    return detail::cubic_moment_margin(m, K.lower(0), K.upper(0));
  }
  const int n = basis.control_dim();
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    margin = std::min(margin, detail::quadratic_pair_margin(m[i], m[n + i], K.lower(i), K.upper(i)));
  }
  return margin;
}

/// L1 distance from m to the convex hull of phi sampled on K.
inline double hull_distance(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m,
                            int sample_count = kDefaultHullSamples) {
  require_dim(m.size(), basis.moment_dim(), "moment vector");
  const auto pts = curve_samples(basis, curve_parameters(K, sample_count));
  return detail::hull_l1_distance(pts, m).l1;
}

namespace detail {
inline DiscreteMeasure polish_measure(const ControlBasis& basis, const CompactControlSet& K, DiscreteMeasure mu,
                                      const MomentVector& m, int max_iter);
inline Vector measure_residual(const ControlBasis& basis, const DiscreteMeasure& mu, const MomentVector& m);
inline double distance_to_curve(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m);
}  // namespace detail

/// Membership of m in Lambda within absolute tolerance `tol`.
///
/// In automatic mode without a closed form (power1d(3) with K straddling 0)
/// the sampled hull is only an inner approximation, so a point it misses by
/// less than the sampling resolution is re-tested with continuous atoms
/// started from the LP solution.
inline bool lambda_contains(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m,
                            double tol = kMembershipTolerance, MembershipMode mode = MembershipMode::automatic,
                            int hull_samples = kDefaultHullSamples) {
  require_dim(m.size(), basis.moment_dim(), "moment vector");
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (!m.allFinite()) return false;
  if (mode == MembershipMode::closed_form) return closed_form_margin(basis, K, m) >= -tol;
  if (mode == MembershipMode::automatic && has_closed_form_membership(basis, K)) {
    return closed_form_margin(basis, K, m) >= -tol;
  }
  const auto params = curve_parameters(K, hull_samples);
  const auto hd = detail::hull_l1_distance(curve_samples(basis, params), m);
  if (hd.l1 <= tol) return true;
  if (mode == MembershipMode::hull) return false;

  if (detail::distance_to_curve(basis, K, m) <= tol) return true;
  const double spacing = (K.upper() - K.lower()).maxCoeff() / std::max(hull_samples - 1, 1);
  if (hd.l1 > 100.0 * spacing * spacing * (1.0 + m.cwiseAbs().maxCoeff())) return false;
  DiscreteMeasure mu;
  for (int j = 0; j < hd.weights.size(); ++j) {
    if (hd.weights[j] > 0.0) {
      mu.atoms.push_back(params[j]);
      mu.weights.push_back(hd.weights[j]);
    }
  }
  if (mu.atoms.empty()) return false;
  mu = detail::polish_measure(basis, K, std::move(mu), m, 100);
  return detail::measure_residual(basis, mu, m).norm() <= tol;
}

// ---------------------------------------------------------------------------
// Extreme points
// ---------------------------------------------------------------------------

struct HullExtremePoints {
  std::vector<MomentVector> vertices;
  std::vector<Vector> parameters;  // control value u with phi(u) = vertex
  bool degenerate = false;
  std::string note;
};

/// Vertices of the convex hull of an arbitrary point set (indices, ascending).
inline detail::HullVertices convex_hull_vertices(const std::vector<Vector>& pts) {
  return detail::hull_vertices(pts);
}

inline HullExtremePoints hull_extreme_points(const ControlBasis& basis, const CompactControlSet& K,
                                             int sample_count = kDefaultHullSamples) {
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (sample_count < basis.moment_dim() + 2) {
    throw InputError("hull_extreme_points needs at least s + 2 samples");
  }
  const auto params = curve_parameters(K, sample_count);
  const auto pts = curve_samples(basis, params);
  const auto hv = detail::hull_vertices(pts);
  HullExtremePoints out;
  out.degenerate = hv.degenerate;
  if (hv.degenerate) out.note = "sampled curve does not span moment space; hull is degenerate";
  for (int i : hv.indices) {
    out.vertices.push_back(pts[i]);
    out.parameters.push_back(params[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance to the curve L
// ---------------------------------------------------------------------------

struct CurvePoint {
  Vector u;
  double distance;
};

/// Closest point of L = phi(K) to m: grid scan plus golden-section
/// refinement, ties broken toward the smaller parameter.
inline CurvePoint nearest_on_curve(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m,
                                   int grid_n = kDistanceGrid) {
  require_dim(m.size(), basis.moment_dim(), "moment vector");
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (basis.kind() == BasisKind::power1d) {
    auto sq = [&](double t) { return (m - phi_eval(basis, t)).squaredNorm(); };
    const auto r = detail::scan_minimize(sq, K.lower(0), K.upper(0), grid_n);
    return {Vector::Constant(1, r.x), std::sqrt(std::max(0.0, r.value))};
  }
  // quadratic_diag separates by coordinate.
  const int n = basis.control_dim();
  Vector u(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    auto sq = [&](double t) {
      const double d1 = m[i] - t;
      const double d2 = m[n + i] - t * t;
      return d1 * d1 + d2 * d2;
    };
    const auto r = detail::scan_minimize(sq, K.lower(i), K.upper(i), grid_n);
    u[i] = r.x;
    total += std::max(0.0, r.value);
  }
  return {u, std::sqrt(total)};
}

inline double distance_to_L(const ControlBasis& basis, const CompactControlSet& K, const MomentVector& m) {
  return nearest_on_curve(basis, K, m).distance;
}

inline double detail::distance_to_curve(const ControlBasis& basis, const CompactControlSet& K,
                                        const MomentVector& m) {
  return distance_to_L(basis, K, m);
}

// ---------------------------------------------------------------------------
// Caratheodory decomposition
// ---------------------------------------------------------------------------

namespace detail {

inline Vector measure_residual(const ControlBasis& basis, const DiscreteMeasure& mu, const MomentVector& m) {
  const int s = basis.moment_dim();
  Vector r = Vector::Zero(s + 1);
  for (std::size_t j = 0; j < mu.size(); ++j) r.head(s) += mu.weights[j] * phi_eval(basis, mu.atoms[j]);
  r.head(s) -= m;
  r[s] = mu.weight_sum() - 1.0;
  return r;
}

/// Gauss-Newton on atoms and weights (minimum-norm steps), projected onto
/// K x {w >= 0}, driving the moments of mu onto m.
inline DiscreteMeasure polish_measure(const ControlBasis& basis, const CompactControlSet& K, DiscreteMeasure mu,
                                      const MomentVector& m, int max_iter) {
  const int s = basis.moment_dim();
  const int n = basis.control_dim();
  Vector r = measure_residual(basis, mu, m);
  for (int it = 0; it < max_iter && r.norm() > 1e-15 * (1.0 + m.norm()); ++it) {
    const int k = static_cast<int>(mu.size());
    Matrix J = Matrix::Zero(s + 1, k * (n + 1));
    for (int j = 0; j < k; ++j) {
      J.block(0, j * (n + 1), s, n) = mu.weights[j] * phi_jacobian(basis, mu.atoms[j]);
      J.block(0, j * (n + 1) + n, s, 1) = phi_eval(basis, mu.atoms[j]);
      J(s, j * (n + 1) + n) = 1.0;
    }
    const Vector step = -J.completeOrthogonalDecomposition().solve(r);
    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      DiscreteMeasure trial = mu;
      for (int j = 0; j < k; ++j) {
        trial.atoms[j] = K.clamp(trial.atoms[j] + alpha * step.segment(j * (n + 1), n));
        trial.weights[j] = std::max(0.0, trial.weights[j] + alpha * step[j * (n + 1) + n]);
      }
      const Vector rt = measure_residual(basis, trial, m);
      if (rt.norm() < r.norm()) {
        mu = std::move(trial);
        r = rt;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return mu;
}

/// Merges atoms closer than `radius` (per coordinate) into their weighted mean.
inline DiscreteMeasure merge_close_atoms(DiscreteMeasure mu, double radius) {
  DiscreteMeasure out;
  std::vector<bool> used(mu.size(), false);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (used[i]) continue;
    Vector acc = mu.weights[i] * mu.atoms[i];
    double w = mu.weights[i];
    used[i] = true;
    for (std::size_t j = i + 1; j < mu.size(); ++j) {
      if (!used[j] && (mu.atoms[j] - mu.atoms[i]).cwiseAbs().maxCoeff() <= radius) {
        acc += mu.weights[j] * mu.atoms[j];
        w += mu.weights[j];
        used[j] = true;
      }
    }
    if (w <= 0.0) continue;
    out.atoms.push_back(acc / w);
    out.weights.push_back(w);
  }
  return out;
}

/// Two-atom representation of a point of the p = 2 moment set on [a, b]
/// with one atom at a.
inline DiscreteMeasure quadratic_pair_measure(double m1, double m2, double a, double b) {
  const double dm = m1 - a;
  if (dm <= 0.0) return DiscreteMeasure::dirac(a);
  double t = (m2 - a * a) / dm - a;
  t = std::min(std::max(t, a), b);
  if (t - a <= 0.0) return DiscreteMeasure::dirac(a);
  const double wt = std::min(1.0, dm / (t - a));
  if (wt >= 1.0) return DiscreteMeasure::dirac(t);
  return {{Vector::Constant(1, a), Vector::Constant(1, t)}, {1.0 - wt, wt}};
}

}  // namespace detail

/// A measure with at most s + 1 atoms whose moments reproduce m within tol.
/// Throws NotRepresentableError when m is not in Lambda.
inline DiscreteMeasure caratheodory_decompose(const ControlBasis& basis, const CompactControlSet& K,
                                              const MomentVector& m, double tol = kMembershipTolerance) {
  require_dim(m.size(), basis.moment_dim(), "moment vector");
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (!lambda_contains(basis, K, m, tol)) {
    throw NotRepresentableError("moment vector is not in Lambda for " + basis.name());
  }
  const CurvePoint near = nearest_on_curve(basis, K, m);
  if (near.distance <= tol) return DiscreteMeasure::dirac(near.u);

  DiscreteMeasure mu;
  if (basis.kind() == BasisKind::quadratic_diag || basis.degree() == 2) {
    const int n = basis.control_dim();
    // Product of per-coordinate two-atom measures.
    mu = DiscreteMeasure::dirac(Vector::Zero(n));
    for (int i = 0; i < n; ++i) {
      const auto pair = detail::quadratic_pair_measure(m[i], m[n + i], K.lower(i), K.upper(i));
      DiscreteMeasure next;
      for (std::size_t j = 0; j < mu.size(); ++j) {
        for (std::size_t k = 0; k < pair.size(); ++k) {
          Vector u = mu.atoms[j];
          u[i] = pair.atoms[k][0];
          next.atoms.push_back(u);
          next.weights.push_back(mu.weights[j] * pair.weights[k]);
        }
      }
      mu = std::move(next);
    }
    mu = reduce_caratheodory(basis, std::move(mu));
  } else {
    // Basic feasible solution of the sampled-hull LP: at most s + 1 atoms.
    const auto params = curve_parameters(K, kDefaultHullSamples);
    const auto hd = detail::hull_l1_distance(curve_samples(basis, params), m);
    for (int j = 0; j < hd.weights.size(); ++j) {
      if (hd.weights[j] > 0.0) {
        mu.atoms.push_back(params[j]);
        mu.weights.push_back(hd.weights[j]);
      }
    }
    const double spacing = (K.upper() - K.lower()).maxCoeff() / (kDefaultHullSamples - 1);
    mu = detail::merge_close_atoms(std::move(mu), 2.5 * spacing);
  }
  mu = detail::polish_measure(basis, K, std::move(mu), m, 100);
  mu = reduce_caratheodory(basis, std::move(mu));
  const Vector r = detail::measure_residual(basis, mu, m);
  if (r.head(basis.moment_dim()).norm() > tol) {
    throw NotRepresentableError("could not realize moment vector within tolerance (residual " +
                                std::to_string(r.norm()) + ")");
  }
  return mu;
}

}  // namespace momentcert
