#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "momentcert/moment_set.hpp"
#include "momentcert/problem.hpp"
#include "momentcert/relaxed_solver.hpp"

namespace momentcert {

// ---------------------------------------------------------------------------
// Grid dynamic programming for the classical problem (N = 1)
// ---------------------------------------------------------------------------

struct DPConfig {
  /// State grid; when unset the range comes from the reachability pre-scan.
  std::optional<std::pair<double, double>> state_range;
  int state_points = 201;
  int control_points = 41;
  int steps = 20;
};

struct DPResult {
  double value = 0.0;        // cost of the greedy path, simulated exactly
  double grid_value = 0.0;   // interpolated value function at x0
  std::vector<Vector> controls;
  std::vector<double> states;
  std::pair<double, double> state_range;
  std::pair<double, double> reachable_range;
};

namespace detail {

struct Step1 {
  double x;
  double cost;
};

inline Step1 classical_step(const ProblemSpec& spec, double x, const MomentVector& m, double dt) {
  Vector xv = Vector::Constant(1, x);
  double J = 0.0;
  rk4_step(spec, m, dt, xv, J);
  return {xv[0], J};
}

inline double interp(const std::vector<double>& grid, const std::vector<double>& v, double x) {
  if (x <= grid.front()) return v.front();
  if (x >= grid.back()) return v.back();
  const double h = grid[1] - grid[0];
  const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / h), grid.size() - 2);
  const double t = (x - grid[i]) / h;
  return (1.0 - t) * v[i] + t * v[i + 1];
}

}  // namespace detail

/// Backward value iteration over a uniform state grid with per-step
/// minimization over a control grid and linear interpolation, followed by a
/// greedy forward pass. Throws InputError for N != 1 and Error when the
/// forward path leaves the state grid.
inline DPResult dp_value_original(const ProblemSpec& spec, const DPConfig& cfg = {}) {
  if (spec.state_dim() != 1) throw InputError("dp_value_original supports N = 1 only");
  if (spec.basis.control_dim() != 1) throw InputError("dp_value_original supports n = 1 only");
  if (cfg.state_points < 2 || cfg.control_points < 1 || cfg.steps < 1) throw InputError("DP grids must be nonempty");
  validate(spec);
  const int M = cfg.steps;
  const double dt = spec.T / M;
  const auto ugrid = linspace(spec.K.lower(0), spec.K.upper(0), std::max(cfg.control_points, 2));
  std::vector<MomentVector> phis;
  for (double u : ugrid) phis.push_back(phi_eval(spec.basis, u));

  // Reachability pre-scan: propagate an enclosing interval with every
  // control from a handful of states inside it.
  DPResult out;
  double rlo = spec.x0[0], rhi = spec.x0[0];
  {
    double lo = rlo, hi = rhi;
    for (int k = 0; k < M; ++k) {
      double nlo = std::numeric_limits<double>::infinity(), nhi = -nlo;
      for (int i = 0; i <= 8; ++i) {
        const double x = lo + (hi - lo) * i / 8.0;
        for (const auto& m : phis) {
          const double y = detail::classical_step(spec, x, m, dt).x;
          nlo = std::min(nlo, y);
          nhi = std::max(nhi, y);
        }
      }
      lo = nlo;
      hi = nhi;
      rlo = std::min(rlo, lo);
      rhi = std::max(rhi, hi);
    }
  }
  out.reachable_range = {rlo, rhi};
  const double pad = 0.05 * std::max(rhi - rlo, 1e-3);
  std::pair<double, double> range = cfg.state_range.value_or(std::make_pair(rlo - pad, rhi + pad));
  if (range.first > spec.x0[0] || range.second < spec.x0[0]) {
    throw InputError("DP state range does not contain x0; suggested range [" + std::to_string(rlo - pad) + ", " +
                     std::to_string(rhi + pad) + "]");
  }
  out.state_range = range;
  const auto xgrid = linspace(range.first, range.second, cfg.state_points);

  // Backward sweep.
  std::vector<std::vector<double>> V(M + 1, std::vector<double>(xgrid.size(), 0.0));
  std::vector<std::vector<int>> policy(M, std::vector<int>(xgrid.size(), 0));
  for (int k = M - 1; k >= 0; --k) {
    for (std::size_t i = 0; i < xgrid.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t j = 0; j < phis.size(); ++j) {
        const auto st = detail::classical_step(spec, xgrid[i], phis[j], dt);
        const double v = st.cost + detail::interp(xgrid, V[k + 1], st.x);
        if (v < best - 1e-15) {
          best = v;
          arg = static_cast<int>(j);
        }
      }
      V[k][i] = best;
      policy[k][i] = arg;
    }
  }
  out.grid_value = detail::interp(xgrid, V[0], spec.x0[0]);

  // Greedy forward path using the interpolated value function.
  double x = spec.x0[0];
  out.states.push_back(x);
  for (int k = 0; k < M; ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < phis.size(); ++j) {
      const auto st = detail::classical_step(spec, x, phis[j], dt);
      const double v = st.cost + detail::interp(xgrid, V[k + 1], st.x);
      if (v < best - 1e-15) {
        best = v;
        arg = j;
      }
    }
    x = detail::classical_step(spec, x, phis[arg], dt).x;
    if (x < range.first - 1e-12 || x > range.second + 1e-12) {
      throw Error("DP forward path left the state grid at step " + std::to_string(k) + "; suggested range [" +
                  std::to_string(std::min(rlo, x) - pad) + ", " + std::to_string(std::max(rhi, x) + pad) + "]");
    }
    out.controls.push_back(Vector::Constant(1, ugrid[arg]));
    out.states.push_back(x);
  }
  out.value = integrate_classical(spec, out.controls).cost();
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive minimization over the section of Lambda
// ---------------------------------------------------------------------------

struct ConstrainedMinOptions {
  int atom_grid_n = 201;            // points per atom dimension
  double constraint_tol = 1e-9;
  double value_tol = 1e-9;
  long long combination_cap = 5'000'000;
};

struct SectionMinimizer {
  MomentVector m;
  DiscreteMeasure measure;
  double distance_to_L = 0.0;
};

struct ConstrainedMinResult {
  double value = std::numeric_limits<double>::infinity();
  std::vector<SectionMinimizer> minimizers;
  long long combinations = 0;
  int grid_points_per_dim = 0;
  double grid_spacing = 0.0;
  bool capped = false;  // grid shrunk to respect combination_cap
};

namespace detail {

inline long long binomial(long long n, int k) {
  long double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<long long>(r + 0.5L);
}

}  // namespace detail

/// Enumerates every measure with at most N + 1 atoms on the atom grid whose
/// weights solve Q m = xi and sum to one exactly (within constraint_tol).
/// Extreme points of the section carry at most N + 1 atoms, so the minimum
/// over the grid is attained by one of them. Every combination within
/// value_tol of the minimum is kept; when distinct minimizers exist their
/// midpoint (also a minimizer, by convexity) is added as well.
inline ConstrainedMinResult constrained_min_over_lambda(const Vector& c, const Matrix& Q, const Vector& xi,
                                                        const ControlBasis& basis, const CompactControlSet& K,
                                                        const ConstrainedMinOptions& opt = {}) {
  const int s = basis.moment_dim(), N = static_cast<int>(Q.rows()), n = K.dim();
  require_dim(c.size(), s, "constrained_min c");
  require_dim(Q.cols(), s, "constrained_min Q");
  require_dim(xi.size(), N, "constrained_min xi");
  const int k_max = std::min(N + 1, s + 1);

  ConstrainedMinResult out;
  int per = opt.atom_grid_n;
  auto total_points = [&](int p) { return static_cast<long long>(std::pow(p, n)); };
  while (per > 2 && detail::binomial(total_points(per), k_max) > opt.combination_cap) {
    --per;
    out.capped = true;
  }
  out.grid_points_per_dim = per;
  for (int i = 0; i < n; ++i) out.grid_spacing = std::max(out.grid_spacing, (K.upper(i) - K.lower(i)) / (per - 1));
  const auto grid = control_grid(K, per);
  const int G = static_cast<int>(grid.size());
  std::vector<MomentVector> phis(G);
  Matrix A(N + 1, G);
  Vector cost(G);
  for (int j = 0; j < G; ++j) {
    phis[j] = phi_eval(basis, grid[j]);
    A.block(0, j, N, 1) = Q * phis[j];
    A(N, j) = 1.0;
    cost[j] = c.dot(phis[j]);
  }
  Vector rhs(N + 1);
  rhs << xi, 1.0;

  struct Candidate {
    std::vector<int> idx;
    std::vector<double> w;
    double value;
  };
  std::vector<Candidate> found;
  double best = std::numeric_limits<double>::infinity();
  const double scale = 1.0 + std::abs(cost.cwiseAbs().maxCoeff());

  std::vector<int> idx;
  auto consider = [&]() {
    const int k = static_cast<int>(idx.size());
    Matrix B(N + 1, k);
    for (int j = 0; j < k; ++j) B.col(j) = A.col(idx[j]);
    const Vector w = k == N + 1 ? Vector(B.fullPivLu().solve(rhs)) : Vector(B.colPivHouseholderQr().solve(rhs));
    if (!w.allFinite() || w.minCoeff() < -1e-12) return;
    if ((B * w - rhs).cwiseAbs().maxCoeff() > opt.constraint_tol) return;
    // Degenerate systems can return a solution that is not unique; skip
    // combinations whose atoms are not affinely independent in the image.
    if (k > 1) {
      Eigen::FullPivLU<Matrix> lu(B);
      if (lu.rank() < k) return;
    }
    double v = 0.0;
    for (int j = 0; j < k; ++j) v += w[j] * cost[idx[j]];
    if (v > best + opt.value_tol * scale) return;
    best = std::min(best, v);
    std::vector<double> ww(w.data(), w.data() + k);
    found.push_back({idx, std::move(ww), v});
  };

  // Enumerate index combinations of size 1..k_max in lexicographic order.
  for (int k = 1; k <= k_max; ++k) {
    idx.assign(k, 0);
    for (int j = 0; j < k; ++j) idx[j] = j;
    if (k > G) break;
    while (true) {
      ++out.combinations;
      consider();
      int p = k - 1;
      while (p >= 0 && idx[p] == G - k + p) --p;
      if (p < 0) break;
      ++idx[p];
      for (int j = p + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  if (found.empty()) detail::throw_infeasible(basis, K, Q, xi);
  out.value = best;

  for (const auto& cand : found) {
    if (cand.value > best + opt.value_tol * scale) continue;
    SectionMinimizer sm;
    sm.m = MomentVector::Zero(s);
    for (std::size_t j = 0; j < cand.idx.size(); ++j) {
      if (cand.w[j] <= 0.0) continue;
      sm.measure.atoms.push_back(grid[cand.idx[j]]);
      sm.measure.weights.push_back(cand.w[j]);
      sm.m += cand.w[j] * phis[cand.idx[j]];
    }
    const double wsum = sm.measure.weight_sum();
    for (auto& w : sm.measure.weights) w /= wsum;
    // Drop duplicates of an already recorded moment vector.
    const bool dup = std::any_of(out.minimizers.begin(), out.minimizers.end(),
                                 [&](const SectionMinimizer& o) { return (o.m - sm.m).norm() <= 1e-12; });
    if (dup) continue;
    sm.distance_to_L = distance_to_L(basis, K, sm.m);
    out.minimizers.push_back(std::move(sm));
  }
  if (out.minimizers.size() >= 2) {
    // The minimizing set is convex: the midpoint of the two farthest-apart
    // minimizers is also one.
    std::size_t a = 0, b = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < out.minimizers.size(); ++i) {
      for (std::size_t j = i + 1; j < out.minimizers.size(); ++j) {
        const double d = (out.minimizers[i].m - out.minimizers[j].m).norm();
        if (d > far) {
          far = d;
          a = i;
          b = j;
        }
      }
    }
    if (far > 1e-9) {
      SectionMinimizer mid;
      mid.m = 0.5 * (out.minimizers[a].m + out.minimizers[b].m);
      for (const auto* src : {&out.minimizers[a], &out.minimizers[b]}) {
        for (std::size_t j = 0; j < src->measure.size(); ++j) {
          mid.measure.atoms.push_back(src->measure.atoms[j]);
          mid.measure.weights.push_back(0.5 * src->measure.weights[j]);
        }
      }
      mid.distance_to_L = distance_to_L(basis, K, mid.m);
      out.minimizers.push_back(std::move(mid));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar argmin scan of g(t) = (c + eta q) . phi(t)
// ---------------------------------------------------------------------------

struct ArgminResult {
  std::vector<double> points;  // sorted minimizers
  double value = 0.0;
  int clusters = 0;
  double diameter_cells = 0.0;
  double spacing = 0.0;
};

inline ArgminResult unique_argmin_g(const Vector& c, const Vector& q, const ControlBasis& basis,
                                    const CompactControlSet& K, double eta, int grid_n = 2001,
                                    double value_tol = 1e-12) {
  if (basis.control_dim() != 1) throw InputError("unique_argmin_g needs a one-dimensional control");
  require_dim(c.size(), basis.moment_dim(), "unique_argmin_g c");
  require_dim(q.size(), basis.moment_dim(), "unique_argmin_g q");
  const Vector r = c + eta * q;
  auto g = [&](double t) { return r.dot(phi_eval(basis, t)); };
  const double a = K.lower(0), b = K.upper(0);
  const auto grid = linspace(a, b, grid_n);
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = g(grid[i]);

  std::vector<std::pair<double, double>> cand;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool left = i == 0 || vals[i] <= vals[i - 1];
    const bool right = i + 1 == grid.size() || vals[i] <= vals[i + 1];
    cand.emplace_back(grid[i], vals[i]);
    if (left && right) {
      const auto rm = detail::golden_section(g, grid[i == 0 ? 0 : i - 1], grid[std::min(i + 1, grid.size() - 1)]);
      cand.emplace_back(rm.x, rm.value);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [x, v] : cand) best = std::min(best, v);
  ArgminResult out;
  out.value = best;
  out.spacing = (b - a) / (grid_n - 1);
  const double tol = value_tol * (1.0 + std::abs(best));
  for (const auto& [x, v] : cand) {
    if (v <= best + tol) out.points.push_back(x);
  }
  std::sort(out.points.begin(), out.points.end());
  out.points.erase(std::unique(out.points.begin(), out.points.end(),
                               [](double p, double q2) { return std::abs(p - q2) <= 1e-15; }),
                   out.points.end());
  out.clusters = out.points.empty() ? 0 : 1;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (out.points[i] - out.points[i - 1] > 2.0 * out.spacing) ++out.clusters;
  }
  out.diameter_cells = out.points.empty() ? 0.0 : (out.points.back() - out.points.front()) / out.spacing;
  return out;
}

// ---------------------------------------------------------------------------
// Orientor field convexity probe (n = 1)
// ---------------------------------------------------------------------------

struct ProbeResult {
  bool convex = true;
  double xi_lower = 0.0, xi_upper = 0.0;
  double min_second_difference = 0.0;
  std::vector<double> xi;        // grid
  std::vector<double> boundary;  // lower boundary phi_x(xi)
  std::optional<std::array<double, 3>> witness_xi;
  std::optional<std::array<double, 3>> witness_value;
};

namespace detail {

/// Real roots of the polynomial with coefficients p[0] + p[1] t + ... in
/// [a, b], degree <= 2.
inline std::vector<double> poly_roots_upto2(const std::vector<double>& p, double a, double b) {
  std::vector<double> r;
  const double A = p.size() > 2 ? p[2] : 0.0, B = p.size() > 1 ? p[1] : 0.0, C = p[0];
  if (A == 0.0) {
    if (B != 0.0) r.push_back(-C / B);
  } else {
    const double d = B * B - 4 * A * C;
    if (d >= 0.0) {
      const double sq = std::sqrt(d);
      const double t1 = (-B - std::copysign(sq, B)) / 2.0;
      if (t1 != 0.0) {
        r.push_back(t1 / A);
        r.push_back(C / t1);
      } else {
        r.push_back(0.0);
      }
    }
  }
  std::vector<double> out;
  for (double t : r) {
    if (t > a && t < b) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Lower boundary phi_x(xi) = min { c(x).phi(u) : Q(x).phi(u) = xi, u in K }
/// on a grid over the attainable range, with a discrete convexity test
/// (second differences >= -1e-9). All real roots of the scalar constraint
/// are found piecewise on the monotone pieces of Q.phi, and the branch with
/// least cost is taken.
inline ProbeResult orientor_convexity_probe(const ProblemSpec& spec, const Vector& x, int xi_grid_n = 201,
                                            double tol = 1e-9) {
  if (spec.state_dim() != 1 || spec.basis.kind() != BasisKind::power1d) {
    throw InputError("orientor_convexity_probe needs N = n = 1 and a power basis");
  }
  const Vector c = spec.cost_at(x);
  const Vector q = spec.dynamics_at(x).row(0).transpose();
  const int p = spec.basis.degree();
  const double a = spec.K.lower(0), b = spec.K.upper(0);
  auto h = [&](double t) { return q.dot(phi_eval(spec.basis, t)); };
  auto cost = [&](double t) { return c.dot(phi_eval(spec.basis, t)); };
  // h'(t) = q1 + 2 q2 t + 3 q3 t^2
  std::vector<double> dh = {q[0], 2.0 * q[1]};
  if (p == 3) dh.push_back(3.0 * q[2]);
  std::vector<double> breaks = {a};
  for (double t : detail::poly_roots_upto2(dh, a, b)) breaks.push_back(t);
  breaks.push_back(b);

  ProbeResult out;
  out.xi_lower = std::numeric_limits<double>::infinity();
  out.xi_upper = -out.xi_lower;
  for (double t : breaks) {
    out.xi_lower = std::min(out.xi_lower, h(t));
    out.xi_upper = std::max(out.xi_upper, h(t));
  }
  if (!(out.xi_upper >= out.xi_lower)) throw Error("empty attainable range");
  out.xi = linspace(out.xi_lower, out.xi_upper, xi_grid_n);
  if (out.xi_upper == out.xi_lower) out.xi.assign(1, out.xi_lower);
  for (double xi : out.xi) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      const double lo = breaks[i], hi = breaks[i + 1];
      const double flo = h(lo) - xi, fhi = h(hi) - xi;
      const double slack = 1e-12 * (1.0 + std::abs(xi));
      if (std::abs(flo) <= slack) best = std::min(best, cost(lo));
      if (std::abs(fhi) <= slack) best = std::min(best, cost(hi));
      if ((flo < 0.0) != (fhi < 0.0) && std::abs(flo) > slack && std::abs(fhi) > slack) {
        best = std::min(best, cost(detail::bisect([&](double t) { return h(t) - xi; }, lo, hi, 1e-14)));
      }
    }
    out.boundary.push_back(best);
  }
  out.min_second_difference = 0.0;
  for (std::size_t i = 1; i + 1 < out.boundary.size(); ++i) {
    const double d2 = out.boundary[i - 1] - 2.0 * out.boundary[i] + out.boundary[i + 1];
    out.min_second_difference = std::min(out.min_second_difference, d2);
    if (d2 < -tol && out.convex) {
      out.convex = false;
      out.witness_xi = std::array<double, 3>{out.xi[i - 1], out.xi[i], out.xi[i + 1]};
      out.witness_value = std::array<double, 3>{out.boundary[i - 1], out.boundary[i], out.boundary[i + 1]};
    }
  }
  return out;
}

}  // namespace momentcert
