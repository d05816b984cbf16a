#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "momentcert/basis.hpp"
#include "momentcert/measure.hpp"

namespace momentcert {

/// Relaxed control problem
///   minimize  int_0^T c(x) . m(t) dt
///   subject to x' = Q(x) m(t) + Q0(x),  x(0) = x0,  m(t) in Lambda.
struct ProblemSpec {
  ControlBasis basis = ControlBasis::power1d(2);
  CompactControlSet K = CompactControlSet::interval(-1, 1);
  VectorField c;   // R^N -> R^s
  MatrixField Q;   // R^N -> R^{N x s}
  VectorField Q0;  // R^N -> R^N; empty means zero drift
  Vector x0;
  double T = 1.0;

  /// Declared state range used for sampling-based checks. Defaults to
  /// x0 +- 1 when unset.
  std::optional<std::pair<Vector, Vector>> state_range;

  /// Integration stops with DivergenceError once |x|_inf exceeds this.
  double divergence_bound = 1e8;

  int state_dim() const { return static_cast<int>(x0.size()); }

  std::pair<Vector, Vector> effective_state_range() const {
    if (state_range) return *state_range;
    return {x0.array() - 1.0, x0.array() + 1.0};
  }

  Vector cost_at(const Vector& x) const {
    Vector v = c(x);
    require_dim(v.size(), basis.moment_dim(), "cost vector c(x)");
    return v;
  }

  Matrix dynamics_at(const Vector& x) const {
    Matrix m = Q(x);
    require_dim(m.rows(), state_dim(), "dynamics Q(x) rows");
    require_dim(m.cols(), basis.moment_dim(), "dynamics Q(x) columns");
    return m;
  }

  Vector drift_at(const Vector& x) const {
    if (!Q0) return Vector::Zero(state_dim());
    Vector v = Q0(x);
    require_dim(v.size(), state_dim(), "drift Q0(x)");
    return v;
  }
};

/// `points` states spread over the box [lo, hi]: a uniform grid in 1-D, a
/// tensor grid with ceil(points^(1/N)) nodes per axis otherwise.
inline std::vector<Vector> state_samples(const Vector& lo, const Vector& hi, int points) {
  const int N = static_cast<int>(lo.size());
  if (N == 0) return {};
  const int per_axis =
      N == 1 ? points : std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(points), 1.0 / N))));
  std::vector<Vector> out;
  std::vector<int> idx(N, 0);
  while (true) {
    Vector x(N);
    for (int i = 0; i < N; ++i) {
      x[i] = per_axis == 1 || hi[i] == lo[i] ? lo[i] : lo[i] + (hi[i] - lo[i]) * idx[i] / (per_axis - 1);
    }
    out.push_back(x);
    int k = N - 1;
    while (k >= 0 && ++idx[k] == per_axis) idx[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

struct LipschitzEstimate {
  double c = 0.0;
  double Q = 0.0;
  double Q0 = 0.0;
};

/// Largest finite-difference slope of c, Q, Q0 between neighboring sample
/// states along each axis.
inline LipschitzEstimate lipschitz_probe(const ProblemSpec& spec, int points_per_axis = 21) {
  const auto [lo, hi] = spec.effective_state_range();
  const int N = spec.state_dim();
  LipschitzEstimate est;
  for (const auto& x : state_samples(lo, hi, static_cast<int>(std::pow(points_per_axis, N)))) {
    for (int i = 0; i < N; ++i) {
      const double h = (hi[i] - lo[i]) / std::max(points_per_axis - 1, 1);
      if (h <= 0.0) continue;
      Vector y = x;
      y[i] += h;
      est.c = std::max(est.c, (spec.cost_at(y) - spec.cost_at(x)).norm() / h);
      est.Q = std::max(est.Q, (spec.dynamics_at(y) - spec.dynamics_at(x)).norm() / h);
      est.Q0 = std::max(est.Q0, (spec.drift_at(y) - spec.drift_at(x)).norm() / h);
    }
  }
  return est;
}

/// Throws InputError or DimensionError when the specification is unusable:
/// nonpositive horizon, missing coefficient functions, wrong shapes, or
/// coefficients that are not finite (or not Lipschitz-bounded) on the state
/// range.
inline void validate(const ProblemSpec& spec, double lipschitz_cap = 1e12) {
  if (!(spec.T > 0.0) || !std::isfinite(spec.T)) throw InputError("horizon T must be positive and finite");
  if (spec.x0.size() == 0) throw InputError("initial state x0 is empty");
  if (!spec.c || !spec.Q) throw InputError("coefficient functions c and Q are required");
  require_dim(spec.K.dim(), spec.basis.control_dim(), "control set K");
  const auto [lo, hi] = spec.effective_state_range();
  require_dim(lo.size(), spec.state_dim(), "state range lower bound");
  require_dim(hi.size(), spec.state_dim(), "state range upper bound");
  if ((hi.array() < lo.array()).any()) throw InputError("state range has lower > upper");
  for (const auto& x : state_samples(lo, hi, 11)) {
    if (!spec.cost_at(x).allFinite() || !spec.dynamics_at(x).allFinite() || !spec.drift_at(x).allFinite()) {
      throw InputError("coefficients are not finite on the state range");
    }
  }
  const auto est = lipschitz_probe(spec);
  if (!(est.c < lipschitz_cap && est.Q < lipschitz_cap && est.Q0 < lipschitz_cap)) {
    throw InputError("coefficients are not Lipschitz-bounded on the state range");
  }
}

struct Integration {
  std::vector<double> times;   // M + 1 nodes
  std::vector<Vector> states;  // M + 1 states
  std::vector<double> cumulative_cost;  // M + 1 values, starting at 0
  double cost() const { return cumulative_cost.back(); }
};

namespace detail {

/// One classical RK4 step of the augmented system (x, J) with constant m.
inline void rk4_step(const ProblemSpec& spec, const Vector& m, double dt, Vector& x, double& J) {
  auto rhs = [&](const Vector& y, double& dJ) -> Vector {
    dJ = spec.c(y).dot(m);
    Vector dx = spec.Q(y) * m;
    if (spec.Q0) dx += spec.Q0(y);
    return dx;
  };
  double j1, j2, j3, j4;
  const Vector k1 = rhs(x, j1);
  const Vector k2 = rhs(x + 0.5 * dt * k1, j2);
  const Vector k3 = rhs(x + 0.5 * dt * k2, j3);
  const Vector k4 = rhs(x + dt * k3, j4);
  x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  J += dt / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
}

inline void check_divergence(const ProblemSpec& spec, const Vector& x, double J, int step) {
  if (!x.allFinite() || !std::isfinite(J) || x.cwiseAbs().maxCoeff() > spec.divergence_bound) {
    throw DivergenceError("state left the bound " + std::to_string(spec.divergence_bound) + " at step " +
                          std::to_string(step));
  }
}

}  // namespace detail

/// Integrates x' = Q(x) m_k + Q0(x) over the uniform grid on [0, T] with
/// one RK4 step per interval and m held at m_k on interval k. The cost is
/// integrated by the same scheme.
///
/// `from` lets callers restart at a stored node: entries 0..from of `prefix`
/// are reused and only intervals from..M-1 are recomputed.
inline Integration integrate_state(const ProblemSpec& spec, const std::vector<MomentVector>& moments,
                                   const Integration* prefix = nullptr, int from = 0) {
  const int M = static_cast<int>(moments.size());
  if (M < 1) throw InputError("integrate_state needs at least one step");
  const double dt = spec.T / M;
  Integration out;
  if (prefix != nullptr && from > 0) {
    out.times.assign(prefix->times.begin(), prefix->times.begin() + from + 1);
    out.states.assign(prefix->states.begin(), prefix->states.begin() + from + 1);
    out.cumulative_cost.assign(prefix->cumulative_cost.begin(), prefix->cumulative_cost.begin() + from + 1);
  } else {
    from = 0;
    out.times = {0.0};
    out.states = {spec.x0};
    out.cumulative_cost = {0.0};
  }
  out.times.reserve(M + 1);
  out.states.reserve(M + 1);
  out.cumulative_cost.reserve(M + 1);
  Vector x = out.states.back();
  double J = out.cumulative_cost.back();
  for (int k = from; k < M; ++k) {
    require_dim(moments[k].size(), spec.basis.moment_dim(), "moment path entry");
    detail::rk4_step(spec, moments[k], dt, x, J);
    detail::check_divergence(spec, x, J, k);
    out.times.push_back(k + 1 == M ? spec.T : dt * (k + 1));
    out.states.push_back(x);
    out.cumulative_cost.push_back(J);
  }
  return out;
}

/// Classical controls u_k held on each interval, i.e. m_k = phi(u_k).
inline Integration integrate_classical(const ProblemSpec& spec, const std::vector<Vector>& controls) {
  std::vector<MomentVector> moments;
  moments.reserve(controls.size());
  for (const auto& u : controls) moments.push_back(phi_eval(spec.basis, u));
  return integrate_state(spec, moments);
}

}  // namespace momentcert
