#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace momentcert::detail {

struct ScalarMin {
  double x;
  double value;
};

/// Golden-section search for a minimum of f on [a, b].
inline ScalarMin golden_section(const std::function<double(double)>& f, double a, double b,
                                double xtol = 1e-13, int max_iter = 200) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > xtol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  // Endpoints of the final bracket compete too, so a minimum sitting exactly
  // on the original boundary is returned exactly.
  ScalarMin best{fc <= fd ? c : d, std::min(fc, fd)};
  for (double x : {a, b}) {
    const double fx = f(x);
    if (fx < best.value) best = {x, fx};
  }
  return best;
}

/// Bisection on a bracket with f(a) and f(b) of opposite sign (or one zero).
inline double bisect(const std::function<double(double)>& f, double a, double b, double xtol = 1e-12) {
  double fa = f(a);
  if (fa == 0.0) return a;
  double fb = f(b);
  if (fb == 0.0) return b;
  for (int it = 0; it < 200 && std::abs(b - a) > xtol; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

/// Minimizes f over [a, b] by scanning `grid_n` nodes, refining every discrete
/// local minimum with golden section, and returning the best refined point.
/// Ties within `tie_tol` are broken toward the smaller argument.
inline ScalarMin scan_minimize(const std::function<double(double)>& f, double a, double b,
                               int grid_n = 2001, double tie_tol = 1e-15) {
  std::vector<double> xs(grid_n), fs(grid_n);
  const double h = (b - a) / (grid_n - 1);
  for (int i = 0; i < grid_n; ++i) {
    xs[i] = (i == grid_n - 1) ? b : a + h * i;
    fs[i] = f(xs[i]);
  }
  ScalarMin best{xs[0], fs[0]};
  for (int i = 0; i < grid_n; ++i) {
    const bool left_ok = (i == 0) || fs[i] <= fs[i - 1];
    const bool right_ok = (i == grid_n - 1) || fs[i] <= fs[i + 1];
    if (!(left_ok && right_ok)) continue;
    const double lo = xs[std::max(i - 1, 0)];
    const double hi = xs[std::min(i + 1, grid_n - 1)];
    ScalarMin r = golden_section(f, lo, hi);
    if (fs[i] < r.value) r = {xs[i], fs[i]};
    if (r.value < best.value - tie_tol || (std::abs(r.value - best.value) <= tie_tol && r.x < best.x)) {
      best = r;
    }
  }
  return best;
}

/// All roots of f on [a, b] located by a `scan_n`-point sign scan and
/// bisection. A node where f vanishes exactly counts as one root.
inline std::vector<double> scan_roots(const std::function<double(double)>& f, double a, double b,
                                      int scan_n = 1000, double xtol = 1e-12) {
  std::vector<double> roots;
  const double h = (b - a) / (scan_n - 1);
  double x_prev = a;
  double f_prev = f(a);
  if (f_prev == 0.0) roots.push_back(a);
  for (int i = 1; i < scan_n; ++i) {
    const double x = (i == scan_n - 1) ? b : a + h * i;
    const double fx = f(x);
    if (fx == 0.0) {
      roots.push_back(x);
    } else if (f_prev != 0.0 && (fx < 0.0) != (f_prev < 0.0)) {
      roots.push_back(bisect(f, x_prev, x, xtol));
    }
    x_prev = x;
    f_prev = fx;
  }
  return roots;
}

}  // namespace momentcert::detail
