#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "momentcert/types.hpp"

namespace momentcert {

enum class BasisKind { power1d, quadratic_diag };

/// The nonlinear control map phi : R^n -> R^s.
///
///   power1d(2):        phi(u) = (u, u^2)
///   power1d(3):        phi(u) = (u, u^2, u^3)
///   quadratic_diag(n): phi(u) = (u_1..u_n, u_1^2..u_n^2)
///
/// The first n moments are always the control itself, so the constraint map
/// Psi_i(m) = phi_{n+i}(m_1..m_n) - m_{n+i} vanishes exactly on the curve.
class ControlBasis {
 public:
  static ControlBasis power1d(int p) {
    if (p != 2 && p != 3) throw InputError("power1d basis supports p in {2,3}, got " + std::to_string(p));
    return ControlBasis(BasisKind::power1d, p, 1);
  }

  static ControlBasis quadratic_diag(int n) {
    if (n < 1) throw InputError("quadratic_diag basis needs n >= 1");
    return ControlBasis(BasisKind::quadratic_diag, 2, n);
  }

  BasisKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int control_dim() const { return n_; }
  int moment_dim() const { return kind_ == BasisKind::power1d ? degree_ : 2 * n_; }
  int constraint_dim() const { return moment_dim() - n_; }

  bool operator==(const ControlBasis& o) const {
    return kind_ == o.kind_ && degree_ == o.degree_ && n_ == o.n_;
  }

  std::string name() const {
    if (kind_ == BasisKind::power1d) return "power1d(" + std::to_string(degree_) + ")";
    return "quadratic_diag(" + std::to_string(n_) + ")";
  }

 private:
  ControlBasis(BasisKind kind, int degree, int n) : kind_(kind), degree_(degree), n_(n) {}

  BasisKind kind_;
  int degree_;
  int n_;
};

/// K as an interval (n = 1) or a box (n > 1). Closed and bounded.
class CompactControlSet {
 public:
  CompactControlSet(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size()) {
      throw InputError("control set bounds must be nonempty and of equal length");
    }
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
        throw InputError("control set needs finite bounds with lower < upper in every coordinate");
      }
    }
  }

  static CompactControlSet interval(double a1, double a2) {
    return {Vector::Constant(1, a1), Vector::Constant(1, a2)};
  }

  static CompactControlSet box(const std::vector<double>& lo, const std::vector<double>& hi) {
    return {to_vector(lo), to_vector(hi)};
  }

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double lower(int i) const { return lower_[i]; }
  double upper(int i) const { return upper_[i]; }
  double diameter() const { return (upper_ - lower_).norm(); }

  bool contains(const Vector& u, double tol = 0.0) const {
    if (u.size() != lower_.size()) return false;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u[i] < lower_[i] - tol || u[i] > upper_[i] + tol) return false;
    }
    return true;
  }

  Vector clamp(Vector u) const {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = std::min(std::max(u[i], lower_[i]), upper_[i]);
    return u;
  }

  /// True when 0 lies in the open interior of an interval K.
  bool straddles_zero() const { return dim() == 1 && lower_[0] < 0.0 && upper_[0] > 0.0; }

 private:
  Vector lower_;
  Vector upper_;
};

/// Uniform grid with `points` nodes on [a, b], endpoints included.
inline std::vector<double> linspace(double a, double b, int points) {
  std::vector<double> out(static_cast<std::size_t>(std::max(points, 1)));
  if (points <= 1) {
    out[0] = a;
    return out;
  }
  const double h = (b - a) / (points - 1);
  for (int i = 0; i < points; ++i) out[i] = a + h * i;
  out.back() = b;
  return out;
}

/// Tensor grid over K with `points_per_dim` nodes per coordinate.
/// Row-major order: the last coordinate varies fastest.
inline std::vector<Vector> control_grid(const CompactControlSet& K, int points_per_dim) {
  const int n = K.dim();
  std::vector<std::vector<double>> axes;
  axes.reserve(n);
  for (int i = 0; i < n; ++i) axes.push_back(linspace(K.lower(i), K.upper(i), points_per_dim));
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  std::vector<Vector> out;
  out.reserve(total);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    Vector u(n);
    for (int i = 0; i < n; ++i) u[i] = axes[i][idx[i]];
    out.push_back(std::move(u));
    for (int i = n - 1; i >= 0; --i) {
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// phi, Psi and their derivatives
// ---------------------------------------------------------------------------

inline MomentVector phi_eval(const ControlBasis& basis, const Vector& u) {
  require_dim(u.size(), basis.control_dim(), "phi_eval control");
  MomentVector m(basis.moment_dim());
  if (basis.kind() == BasisKind::power1d) {
    double pw = 1.0;
    for (int i = 0; i < basis.degree(); ++i) {
      pw *= u[0];
      m[i] = pw;
    }
  } else {
    const int n = basis.control_dim();
    for (int i = 0; i < n; ++i) {
      m[i] = u[i];
      m[n + i] = u[i] * u[i];
    }
  }
  return m;
}

inline MomentVector phi_eval(const ControlBasis& basis, double u) {
  return phi_eval(basis, Vector::Constant(1, u));
}

/// d phi / du, an s x n matrix.
inline Matrix phi_jacobian(const ControlBasis& basis, const Vector& u) {
  require_dim(u.size(), basis.control_dim(), "phi_jacobian control");
  Matrix J = Matrix::Zero(basis.moment_dim(), basis.control_dim());
  if (basis.kind() == BasisKind::power1d) {
    double pw = 1.0;
    for (int i = 0; i < basis.degree(); ++i) {
      J(i, 0) = (i + 1) * pw;
      pw *= u[0];
    }
  } else {
    const int n = basis.control_dim();
    for (int i = 0; i < n; ++i) {
      J(i, i) = 1.0;
      J(n + i, i) = 2.0 * u[i];
    }
  }
  return J;
}

inline Vector psi_eval(const ControlBasis& basis, const MomentVector& m) {
  require_dim(m.size(), basis.moment_dim(), "psi_eval moment");
  Vector out(basis.constraint_dim());
  if (basis.kind() == BasisKind::power1d) {
    out[0] = m[0] * m[0] - m[1];
    if (basis.degree() == 3) out[1] = m[0] * m[0] * m[0] - m[2];
  } else {
    const int n = basis.control_dim();
    for (int i = 0; i < n; ++i) out[i] = m[i] * m[i] - m[n + i];
  }
  return out;
}

/// Jacobian of psi_eval, (s - n) x s.
inline Matrix psi_grad(const ControlBasis& basis, const MomentVector& m) {
  require_dim(m.size(), basis.moment_dim(), "psi_grad moment");
  Matrix G = Matrix::Zero(basis.constraint_dim(), basis.moment_dim());
  if (basis.kind() == BasisKind::power1d) {
    G(0, 0) = 2.0 * m[0];
    G(0, 1) = -1.0;
    if (basis.degree() == 3) {
      G(1, 0) = 3.0 * m[0] * m[0];
      G(1, 2) = -1.0;
    }
  } else {
    const int n = basis.control_dim();
    for (int i = 0; i < n; ++i) {
      G(i, i) = 2.0 * m[i];
      G(i, n + i) = -1.0;
    }
  }
  return G;
}

/// Whether every Psi component is convex on the moments reachable from K.
/// m_1^3 is convex only for m_1 >= 0, so power1d(3) needs K inside (0, inf).
inline bool psi_convex_on(const ControlBasis& basis, const CompactControlSet& K) {
  require_dim(K.dim(), basis.control_dim(), "control set");
  if (basis.kind() == BasisKind::power1d && basis.degree() == 3) return K.lower(0) > 0.0;
  return true;
}

}  // namespace momentcert
