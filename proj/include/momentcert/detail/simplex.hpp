#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "momentcert/types.hpp"

namespace momentcert::detail {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = std::numeric_limits<double>::infinity();
  /// Phase-one infeasibility (sum of artificials) at termination.
  double infeasibility = 0.0;
};

/// Dense two-phase tableau simplex for
///
///   minimize c'x  subject to  A x = b,  x >= 0.
///
/// Sized for the small row counts that arise here (s + 2 rows, a few
/// thousand columns). Dantzig pricing, switching to Bland's rule after
/// `bland_after` pivots to rule out cycling.
class DenseSimplex {
 public:
  explicit DenseSimplex(double tol = 1e-11, int max_pivots = 50000, int bland_after = 5000)
      : tol_(tol), max_pivots_(max_pivots), bland_after_(bland_after) {}

  LpResult solve(const Matrix& A, const Vector& b, const Vector& c) const {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    require_dim(b.size(), m, "simplex rhs");
    require_dim(c.size(), n, "simplex cost");

    // Columns: [x (n) | artificials (m) | rhs]
    Matrix T = Matrix::Zero(m + 1, n + m + 1);
    for (int i = 0; i < m; ++i) {
      const double sign = b[i] < 0.0 ? -1.0 : 1.0;
      T.row(i).head(n) = sign * A.row(i);
      T(i, n + i) = 1.0;
      T(i, n + m) = sign * b[i];
    }
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    // Phase one: minimize the sum of artificials. Reduced-cost row holds
    // -(sum of constraint rows) on the structural columns.
    T.row(m).setZero();
    for (int i = 0; i < m; ++i) {
      T.row(m).head(n) -= T.row(i).head(n);
      T(m, n + m) -= T(i, n + m);
    }
    LpResult res;
    int pivots = 0;
    const LpStatus p1 = iterate(T, basis, n + m, pivots);
    res.infeasibility = -T(m, n + m);
    if (p1 == LpStatus::iteration_limit) {
      res.status = p1;
      return res;
    }
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    if (res.infeasibility > tol_ * scale * 10.0) {
      res.status = LpStatus::infeasible;
      res.x = extract(T, basis, n);
      return res;
    }

    // Drive zero-level artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n) continue;
      for (int j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > tol_) {
          pivot(T, basis, i, j);
          break;
        }
      }
    }

    // Phase two on the structural columns only.
    T.row(m).setZero();
    T.row(m).head(n) = c.transpose();
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n && c[basis[i]] != 0.0) T.row(m) -= c[basis[i]] * T.row(i);
    }
    const LpStatus p2 = iterate(T, basis, n, pivots);
    res.status = p2;
    res.x = extract(T, basis, n);
    res.objective = c.dot(res.x);
    return res;
  }

 private:
  static Vector extract(const Matrix& T, const std::vector<int>& basis, int n) {
    Vector x = Vector::Zero(n);
    const int m = static_cast<int>(basis.size());
    const int rhs = static_cast<int>(T.cols()) - 1;
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n) x[basis[i]] = std::max(0.0, T(i, rhs));
    }
    return x;
  }

  void pivot(Matrix& T, std::vector<int>& basis, int row, int col) const {
    T.row(row) /= T(row, col);
    for (int i = 0; i < T.rows(); ++i) {
      if (i != row) {
        const double f = T(i, col);
        if (f != 0.0) T.row(i) -= f * T.row(row);
      }
    }
    basis[row] = col;
  }

  /// Runs simplex pivots allowing entering columns in [0, allowed).
  LpStatus iterate(Matrix& T, std::vector<int>& basis, int allowed, int& pivots) const {
    const int m = static_cast<int>(basis.size());
    const int rhs = static_cast<int>(T.cols()) - 1;
    while (true) {
      if (pivots >= max_pivots_) return LpStatus::iteration_limit;
      const bool bland = pivots >= bland_after_;
      int enter = -1;
      double best = -tol_;
      for (int j = 0; j < allowed; ++j) {
        const double rc = T(m, j);
        if (rc < best) {
          enter = j;
          if (bland) break;
          best = rc;
        }
      }
      if (enter < 0) return LpStatus::optimal;
      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double a = T(i, enter);
        if (a > tol_) {
          const double r = T(i, rhs) / a;
          if (r < ratio - 1e-15 || (bland && std::abs(r - ratio) <= 1e-15 && basis[i] < basis[leave])) {
            ratio = r;
            leave = i;
          }
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(T, basis, leave, enter);
      ++pivots;
    }
  }

  double tol_;
  int max_pivots_;
  int bland_after_;
};

}  // namespace momentcert::detail
