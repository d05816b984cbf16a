#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "momentcert/detail/simplex.hpp"
#include "momentcert/moment_set.hpp"
#include "momentcert/problem.hpp"

namespace momentcert {

// ---------------------------------------------------------------------------
// Pointwise density: min { c(x).m : m in Lambda, Q(x) m = xi }
// ---------------------------------------------------------------------------

struct DensityResult {
  double value = 0.0;
  MomentVector m;
  DiscreteMeasure measure;  // a representing measure when one is at hand
  std::string method;
};

/// Componentwise range of Q(x) Lambda. A linear map takes the same extreme
/// values over Lambda as over the curve, so a scan of L suffices.
inline std::pair<Vector, Vector> attainable_box(const ControlBasis& basis, const CompactControlSet& K,
                                                const Matrix& Q, int grid_n = kDistanceGrid) {
  const int N = static_cast<int>(Q.rows());
  Vector lo(N), hi(N);
  for (int i = 0; i < N; ++i) {
    const Vector row = Q.row(i).transpose();
    if (basis.kind() == BasisKind::power1d) {
      auto f = [&](double t) { return row.dot(phi_eval(basis, t)); };
      lo[i] = detail::scan_minimize(f, K.lower(0), K.upper(0), grid_n).value;
      hi[i] = -detail::scan_minimize([&](double t) { return -f(t); }, K.lower(0), K.upper(0), grid_n).value;
    } else {
      // Separable: row . phi(u) = sum_j row_j u_j + row_{n+j} u_j^2.
      const int n = basis.control_dim();
      lo[i] = hi[i] = 0.0;
      for (int j = 0; j < n; ++j) {
        auto f = [&](double t) { return row[j] * t + row[n + j] * t * t; };
        lo[i] += detail::scan_minimize(f, K.lower(j), K.upper(j), grid_n).value;
        hi[i] -= detail::scan_minimize([&](double t) { return -f(t); }, K.lower(j), K.upper(j), grid_n).value;
      }
    }
  }
  return {lo, hi};
}

namespace detail {

[[noreturn]] inline void throw_infeasible(const ControlBasis& basis, const CompactControlSet& K, const Matrix& Q,
                                          const Vector& xi) {
  const auto [lo, hi] = attainable_box(basis, K, Q);
  std::string range;
  for (int i = 0; i < lo.size(); ++i) {
    range += (i ? ", [" : "[") + std::to_string(lo[i]) + ", " + std::to_string(hi[i]) + "]";
  }
  std::string target;
  for (int i = 0; i < xi.size(); ++i) target += (i ? ", " : "") + std::to_string(xi[i]);
  throw InfeasibleError("xi = (" + target + ") is outside Q(x) Lambda; attainable range " + range, lo, hi);
}

/// Closed form for phi(t) = (t, t^2), N = 1. The section is a segment of the
/// line q1 m1 + q2 m2 = xi inside Lambda and the objective is linear on it.
inline DensityResult density_p2(const Vector& c, const Vector& q, double xi, const CompactControlSet& K,
                                int grid_n) {
  const double a = K.lower(0), b = K.upper(0);
  const ControlBasis basis = ControlBasis::power1d(2);
  const double feas = 1e-12 * (1.0 + std::abs(xi));
  auto finish = [&](double m1, double m2, const char* method) {
    DensityResult r;
    r.m = MomentVector(2);
    r.m << m1, m2;
    r.value = c.dot(r.m);
    r.method = method;
    return r;
  };
  auto on_line = [&](double m1) { return (xi - q[0] * m1) / q[1]; };

  if (q[1] != 0.0) {
    // m1^2 <= (xi - q1 m1)/q2  <=>  m1^2 + (q1/q2) m1 - xi/q2 <= 0.
    const double B = q[0] / q[1], C = -xi / q[1];
    double disc = B * B - 4.0 * C;
    if (disc < -feas) throw_infeasible(basis, K, q.transpose(), Vector::Constant(1, xi));
    disc = std::max(disc, 0.0);
    double lo = std::max(a, 0.5 * (-B - std::sqrt(disc)));
    double hi = std::min(b, 0.5 * (-B + std::sqrt(disc)));
    // (xi - q1 m1)/q2 <= (a+b) m1 - ab  <=>  alpha m1 >= beta.
    const double alpha = (a + b) + B, beta = xi / q[1] + a * b;
    if (alpha > 0.0) {
      lo = std::max(lo, beta / alpha);
    } else if (alpha < 0.0) {
      hi = std::min(hi, beta / alpha);
    } else if (beta > feas) {
      throw_infeasible(basis, K, q.transpose(), Vector::Constant(1, xi));
    }
    if (lo > hi + 1e-12 * (1.0 + std::abs(hi))) throw_infeasible(basis, K, q.transpose(), Vector::Constant(1, xi));
    hi = std::max(hi, lo);
    const double slope = c[0] - c[1] * B;
    double m1;
    if (std::abs(slope) > 1e-15) {
      m1 = slope > 0.0 ? lo : hi;
    } else {
      // Flat objective: prefer the endpoint nearest the curve.
      auto gap = [&](double t) { return std::abs(on_line(t) - t * t); };
      m1 = gap(lo) <= gap(hi) ? lo : hi;
    }
    return finish(m1, std::max(on_line(m1), m1 * m1), "closed_form_p2");
  }
  if (q[0] != 0.0) {
    const double m1 = xi / q[0];
    if (m1 < a - feas || m1 > b + feas) throw_infeasible(basis, K, q.transpose(), Vector::Constant(1, xi));
    const double t = std::clamp(m1, a, b);
    const double m2 = c[1] >= 0.0 ? t * t : (a + b) * t - a * b;
    return finish(t, m2, "closed_form_p2");
  }
  if (std::abs(xi) > feas) throw_infeasible(basis, K, q.transpose(), Vector::Constant(1, xi));
  const auto r = scan_minimize([&](double t) { return c[0] * t + c[1] * t * t; }, a, b, grid_n);
  return finish(r.x, r.x * r.x, "closed_form_p2");
}

/// LP over point masses on a sampled grid of K, followed by rounds of local
/// grid refinement around the active atoms.
inline DensityResult density_lp(const ControlBasis& basis, const CompactControlSet& K, const Vector& c,
                                const Matrix& Q, const Vector& xi, int grid_n) {
  const int N = static_cast<int>(Q.rows());
  std::vector<Vector> params = curve_parameters(K, grid_n);
  const DenseSimplex lp;
  LpResult res;
  std::vector<Vector> used;
  double spacing = 0.0;
  for (int i = 0; i < K.dim(); ++i) {
    const int per = K.dim() == 1 ? grid_n
                                 : std::max(2, static_cast<int>(std::ceil(std::pow(double(grid_n), 1.0 / K.dim()))));
    spacing = std::max(spacing, (K.upper(i) - K.lower(i)) / (per - 1));
  }
  for (int round = 0; round < 4; ++round) {
    const int cols = static_cast<int>(params.size());
    Matrix A(N + 1, cols);
    Vector cost(cols);
    for (int j = 0; j < cols; ++j) {
      const Vector p = phi_eval(basis, params[j]);
      A.block(0, j, N, 1) = Q * p;
      A(N, j) = 1.0;
      cost[j] = c.dot(p);
    }
    Vector rhs(N + 1);
    rhs << xi, 1.0;
    res = lp.solve(A, rhs, cost);
    if (res.status == LpStatus::infeasible) {
      if (round == 0) throw_infeasible(basis, K, Q, xi);
      break;
    }
    if (res.status != LpStatus::optimal) throw Error("density LP did not converge");
    used = params;
    // Refine around the active atoms.
    std::vector<Vector> next;
    for (int j = 0; j < cols; ++j) {
      if (res.x[j] <= 0.0) continue;
      next.push_back(params[j]);
    }
    const std::vector<Vector> active = next;
    spacing *= 0.1;
    for (const auto& u : active) {
      Vector lo = u.array() - 10.0 * spacing, hi = u.array() + 10.0 * spacing;
      for (int i = 0; i < K.dim(); ++i) {
        lo[i] = std::max(lo[i], K.lower(i));
        hi[i] = std::min(hi[i], K.upper(i));
      }
      if ((hi.array() <= lo.array()).any()) continue;
      for (const auto& v : control_grid(CompactControlSet::box(to_std(lo), to_std(hi)), K.dim() == 1 ? 21 : 9)) {
        next.push_back(v);
      }
    }
    // Keep the full coarse grid so feasibility is never lost.
    if (round == 0) {
      for (const auto& p : params) next.push_back(p);
    } else {
      for (const auto& p : curve_parameters(K, grid_n)) next.push_back(p);
    }
    params = std::move(next);
  }
  DensityResult r;
  r.m = MomentVector::Zero(basis.moment_dim());
  for (std::size_t j = 0; j < used.size(); ++j) {
    if (res.x[j] <= 0.0) continue;
    r.measure.atoms.push_back(used[j]);
    r.measure.weights.push_back(res.x[j]);
  }
  const double total = r.measure.weight_sum();
  for (auto& w : r.measure.weights) w /= total;
  r.m = moments_of(basis, r.measure);
  r.value = c.dot(r.m);
  r.method = "lp_refined";
  return r;
}

}  // namespace detail

/// Minimizes c(x).m over the section {m in Lambda : Q(x) m = xi}. Throws
/// InfeasibleError (carrying the attainable box) if the section is empty.
inline DensityResult eval_density(const ProblemSpec& spec, const Vector& x, const Vector& xi,
                                  int grid_n = kDistanceGrid) {
  const Vector c = spec.cost_at(x);
  const Matrix Q = spec.dynamics_at(x);
  require_dim(xi.size(), spec.state_dim(), "density target xi");
  if (spec.state_dim() == 1 && spec.basis.kind() == BasisKind::power1d && spec.basis.degree() == 2) {
    return detail::density_p2(c, Q.row(0).transpose(), xi[0], spec.K, grid_n);
  }
  return detail::density_lp(spec.basis, spec.K, c, Q, xi, grid_n);
}

// ---------------------------------------------------------------------------
// Relaxed trajectory optimization
// ---------------------------------------------------------------------------

struct SolverOptions {
  int starts = 20;
  int max_iterations = 500;
  double relative_tolerance = 1e-10;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Atoms per step; 0 means s + 1.
  int atoms_per_step = 0;
  /// Central-difference step for the moment gradient.
  double fd_step = 1e-6;
};

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<DiscreteMeasure> measures;
  std::vector<MomentVector> moments;
  std::vector<double> distance_to_L;
  double cost = std::numeric_limits<double>::infinity();
  int best_start = -1;
  int iterations = 0;
  int starts_run = 0;
  std::vector<std::string> discarded;  // one entry per start lost to divergence
};

namespace detail {

/// Euclidean projection onto the probability simplex.
inline void project_simplex(std::vector<double>& w) {
  std::vector<double> s = w;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (auto& v : w) v = std::max(v - theta, 0.0);
}

class RelaxedDescent {
 public:
  RelaxedDescent(const ProblemSpec& spec, int steps, const SolverOptions& opt)
      : spec_(spec), steps_(steps), opt_(opt) {
    atoms_ = opt.atoms_per_step > 0 ? opt.atoms_per_step : spec.basis.moment_dim() + 1;
  }

  struct Run {
    std::vector<DiscreteMeasure> measures;
    Integration path;
    int iterations = 0;
  };

  Run run(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<DiscreteMeasure> mu(steps_);
    const int n = spec_.K.dim();
    for (auto& m : mu) {
      std::uniform_real_distribution<double> U(0.0, 1.0);
      double total = 0.0;
      for (int j = 0; j < atoms_; ++j) {
        Vector u(n);
        for (int i = 0; i < n; ++i) u[i] = spec_.K.lower(i) + U(rng) * (spec_.K.upper(i) - spec_.K.lower(i));
        m.atoms.push_back(u);
        m.weights.push_back(0.05 + U(rng));
        total += m.weights.back();
      }
      for (auto& w : m.weights) w /= total;
    }
    Run r;
    r.measures = std::move(mu);
    r.path = integrate_state(spec_, moments(r.measures));
    const double alpha0 = 0.1 * spec_.K.diameter();
    for (r.iterations = 0; r.iterations < opt_.max_iterations; ++r.iterations) {
      const auto grad = gradient(r.measures, r.path);
      double scale = 0.0;
      for (const auto& g : grad) scale = std::max(scale, g.cwiseAbs().maxCoeff());
      if (!(scale > 0.0)) break;
      const double J = r.path.cost();
      bool accepted = false;
      for (double alpha = alpha0; alpha > 1e-14 * alpha0; alpha *= 0.5) {
        auto trial = step(r.measures, grad, alpha / scale);
        Integration path;
        try {
          path = integrate_state(spec_, moments(trial));
        } catch (const DivergenceError&) {
          continue;
        }
        if (path.cost() < J) {
          r.measures = std::move(trial);
          r.path = std::move(path);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      if (J - r.path.cost() < opt_.relative_tolerance * (1.0 + std::abs(J))) {
        ++r.iterations;
        break;
      }
    }
    cleanup(r);
    return r;
  }

 private:
  std::vector<MomentVector> moments(const std::vector<DiscreteMeasure>& mu) const {
    std::vector<MomentVector> out;
    out.reserve(mu.size());
    for (const auto& m : mu) {
      MomentVector v = MomentVector::Zero(spec_.basis.moment_dim());
      for (std::size_t j = 0; j < m.size(); ++j) v += m.weights[j] * phi_eval(spec_.basis, m.atoms[j]);
      out.push_back(v);
    }
    return out;
  }

  /// Descent direction per step, laid out as [atom_0 (n), ..., atom_k (n),
  /// w_0, ..., w_k]. The derivative with respect to m_k comes from central
  /// differences that re-integrate only from step k; the chain rule through
  /// m_k = sum_j w_j phi(u_j) does the rest. Atom components are divided by
  /// their weight (a diagonal preconditioner), so atoms without mass still
  /// move toward where mass would lower the cost.
  std::vector<Vector> gradient(const std::vector<DiscreteMeasure>& mu, const Integration& base) const {
    const int s = spec_.basis.moment_dim();
    const int n = spec_.K.dim();
    auto ms = moments(mu);
    std::vector<Vector> out(steps_);
    for (int k = 0; k < steps_; ++k) {
      Vector gm(s);
      for (int i = 0; i < s; ++i) {
        const double h = opt_.fd_step * (1.0 + std::abs(ms[k][i]));
        const double keep = ms[k][i];
        ms[k][i] = keep + h;
        const double up = integrate_state(spec_, ms, &base, k).cost();
        ms[k][i] = keep - h;
        const double down = integrate_state(spec_, ms, &base, k).cost();
        ms[k][i] = keep;
        gm[i] = (up - down) / (2.0 * h);
      }
      Vector g(atoms_ * (n + 1));
      for (int j = 0; j < atoms_; ++j) {
        const Vector& u = mu[k].atoms[j];
        g.segment(j * n, n) = phi_jacobian(spec_.basis, u).transpose() * gm;
        g[atoms_ * n + j] = phi_eval(spec_.basis, u).dot(gm);
      }
      out[k] = g;
    }
    return out;
  }

  std::vector<DiscreteMeasure> step(const std::vector<DiscreteMeasure>& mu, const std::vector<Vector>& grad,
                                    double alpha) const {
    const int n = spec_.K.dim();
    std::vector<DiscreteMeasure> out = mu;
    for (int k = 0; k < steps_; ++k) {
      for (int j = 0; j < atoms_; ++j) {
        out[k].atoms[j] = spec_.K.clamp(mu[k].atoms[j] - alpha * grad[k].segment(j * n, n));
        out[k].weights[j] = mu[k].weights[j] - alpha * grad[k][atoms_ * n + j];
      }
      project_simplex(out[k].weights);
    }
    return out;
  }

  /// Drops zero-weight atoms and merges atoms that coincide to within 1e-9
  /// of diam(K); keeps the result only if the cost does not get worse.
  void cleanup(Run& r) const {
    const double radius = 1e-9 * spec_.K.diameter();
    std::vector<DiscreteMeasure> merged;
    merged.reserve(r.measures.size());
    for (const auto& m : r.measures) {
      DiscreteMeasure pruned;
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (m.weights[j] <= 0.0) continue;
        bool joined = false;
        for (std::size_t i = 0; i < pruned.size(); ++i) {
          if ((pruned.atoms[i] - m.atoms[j]).norm() <= radius) {
            const double w = pruned.weights[i] + m.weights[j];
            pruned.atoms[i] = (pruned.weights[i] * pruned.atoms[i] + m.weights[j] * m.atoms[j]) / w;
            pruned.weights[i] = w;
            joined = true;
            break;
          }
        }
        if (!joined) {
          pruned.atoms.push_back(m.atoms[j]);
          pruned.weights.push_back(m.weights[j]);
        }
      }
      const double total = pruned.weight_sum();
      for (auto& w : pruned.weights) w /= total;
      merged.push_back(std::move(pruned));
    }
    const Integration path = integrate_state(spec_, moments(merged));
    if (path.cost() <= r.path.cost() + 1e-12 * (1.0 + std::abs(r.path.cost()))) {
      r.measures = std::move(merged);
      r.path = path;
    }
  }

  const ProblemSpec& spec_;
  int steps_;
  SolverOptions opt_;
  int atoms_;
};

}  // namespace detail

/// Multi-start projected descent over per-step discrete measures (atoms
/// clamped to K, weights projected onto the simplex). Starts use seeds
/// seed + start; the best cost wins with ties going to the lower start index,
/// so the result does not depend on the thread count.
inline TrajectoryResult solve_relaxed(const ProblemSpec& spec, int steps, const SolverOptions& opt = {}) {
  if (steps < 1) throw InputError("solve_relaxed needs at least one step");
  if (opt.starts < 1) throw InputError("solve_relaxed needs at least one start");
  validate(spec);
  const detail::RelaxedDescent descent(spec, steps, opt);

  struct Slot {
    bool ok = false;
    std::string error;
    detail::RelaxedDescent::Run run;
  };
  std::vector<Slot> slots(opt.starts);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < opt.starts; i = next++) {
      try {
        slots[i].run = descent.run(opt.seed + static_cast<std::uint64_t>(i));
        slots[i].ok = true;
      } catch (const DivergenceError& e) {
        slots[i].error = "start " + std::to_string(i) + ": " + e.what();
      }
    }
  };
  const int threads = std::clamp(opt.threads, 1, opt.starts);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  TrajectoryResult out;
  out.starts_run = opt.starts;
  for (int i = 0; i < opt.starts; ++i) {
    if (!slots[i].ok) {
      out.discarded.push_back(slots[i].error);
      continue;
    }
    if (slots[i].run.path.cost() < out.cost) {
      out.cost = slots[i].run.path.cost();
      out.best_start = i;
    }
  }
  if (out.best_start < 0) throw DivergenceError("every start diverged");
  auto& best = slots[out.best_start].run;
  out.times = best.path.times;
  out.states = best.path.states;
  out.measures = std::move(best.measures);
  out.iterations = best.iterations;
  for (const auto& m : out.measures) {
    out.moments.push_back(moments_of(spec.basis, m));
    out.distance_to_L.push_back(distance_to_L(spec.basis, spec.K, out.moments.back()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ExtractionResult {
  bool success = false;
  std::vector<Vector> controls;           // nearest curve parameter per step
  std::vector<double> distances;          // distance_to_L per step
  std::vector<int> offending_steps;       // steps with distance > tol
  double tolerance = 0.0;
  double relaxed_cost = 0.0;
  double classical_cost = std::numeric_limits<double>::quiet_NaN();
};

/// Recovers a classical control when every step's moment lies on L within
/// tol, and simulates it through the original dynamics.
inline ExtractionResult extract_classical(const ProblemSpec& spec, const TrajectoryResult& traj, double tol = 1e-4) {
  ExtractionResult out;
  out.tolerance = tol;
  out.relaxed_cost = traj.cost;
  for (std::size_t k = 0; k < traj.moments.size(); ++k) {
    const auto cp = nearest_on_curve(spec.basis, spec.K, traj.moments[k]);
    out.controls.push_back(cp.u);
    out.distances.push_back(cp.distance);
    if (!(cp.distance <= tol)) out.offending_steps.push_back(static_cast<int>(k));
  }
  out.success = out.offending_steps.empty() && !traj.moments.empty();
  if (out.success) out.classical_cost = integrate_classical(spec, out.controls).cost();
  return out;
}

/// Trajectory as CSV. Row k holds t_k, x_k and the measure used on
/// [t_k, t_k+1); the final row carries only t_M and x_M. Columns:
/// t, x1..xN, m1..ms, dist_to_L, u1..un (u blank when extraction failed).
inline void write_trajectory_csv(std::ostream& os, const ProblemSpec& spec, const TrajectoryResult& traj,
                                 const ExtractionResult* extraction = nullptr) {
  const int N = spec.state_dim(), s = spec.basis.moment_dim(), n = spec.basis.control_dim();
  os << "t";
  for (int i = 1; i <= N; ++i) os << ",x" << i;
  for (int i = 1; i <= s; ++i) os << ",m" << i;
  os << ",dist_to_L";
  if (n == 1) {
    os << ",u";
  } else {
    for (int i = 1; i <= n; ++i) os << ",u" << i;
  }
  os << "\n";
  const auto old_precision = os.precision(17);
  const bool extracted = extraction != nullptr && extraction->success;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    os << traj.times[k];
    for (int i = 0; i < N; ++i) os << "," << traj.states[k][i];
    const bool has_m = k < traj.moments.size();
    for (int i = 0; i < s; ++i) {
      os << ",";
      if (has_m) os << traj.moments[k][i];
    }
    os << ",";
    if (has_m) os << traj.distance_to_L[k];
    for (int i = 0; i < n; ++i) {
      os << ",";
      if (has_m && extracted) os << extraction->controls[k][i];
    }
    os << "\n";
  }
  os.precision(old_precision);
}

}  // namespace momentcert
