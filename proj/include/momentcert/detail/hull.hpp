#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "momentcert/detail/simplex.hpp"
#include "momentcert/types.hpp"

namespace momentcert::detail {

struct HullVertices {
  std::vector<int> indices;  // into the input point list, ascending
  bool degenerate = false;   // input spans less than its ambient dimension
};

inline double point_scale(const std::vector<Vector>& pts) {
  double s = 1.0;
  for (const auto& p : pts) s = std::max(s, p.cwiseAbs().maxCoeff());
  return s;
}

/// Andrew's monotone chain. Collinear boundary points are not vertices.
inline HullVertices hull_vertices_2d(const std::vector<Vector>& pts) {
  const int n = static_cast<int>(pts.size());
  const double eps = 1e-14 * point_scale(pts) * point_scale(pts);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return pts[a][0] < pts[b][0] || (pts[a][0] == pts[b][0] && pts[a][1] < pts[b][1]);
  });
  auto cross = [&](int o, int a, int b) {
    return (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) -
           (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0]);
  };
  std::vector<int> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], order[i]) <= eps) --k;
    hull[k++] = order[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], order[i]) <= eps) --k;
    hull[k++] = order[i];
  }
  hull.resize(std::max(k - 1, 0));
  HullVertices out;
  out.indices = hull;
  std::sort(out.indices.begin(), out.indices.end());
  out.indices.erase(std::unique(out.indices.begin(), out.indices.end()), out.indices.end());
  out.degenerate = out.indices.size() < 3;
  return out;
}

/// Quickhull in three dimensions with farthest-point insertion and a
/// breadth-first visible region, so the horizon is always the boundary of a
/// connected patch.
class QuickHull3 {
 public:
  explicit QuickHull3(const std::vector<Vector>& pts) : n_(static_cast<int>(pts.size())) {
    p_.reserve(pts.size());
    for (const auto& v : pts) p_.emplace_back(v[0], v[1], v[2]);
    double scale = 1.0;
    for (const auto& v : p_) scale = std::max(scale, v.cwiseAbs().maxCoeff());
    eps_ = 1e-13 * scale;
  }

  HullVertices run() {
    HullVertices out;
    if (!initial_simplex()) {
      out.degenerate = true;
      return out;
    }
    std::vector<int> stack;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) stack.push_back(f);
    while (!stack.empty()) {
      const int f = stack.back();
      if (!faces_[f].alive || faces_[f].outside.empty()) {
        stack.pop_back();
        continue;
      }
      const int apex = farthest(f);
      for (int nf : add_point(f, apex)) stack.push_back(nf);
    }
    std::set<int> verts;
    for (const auto& face : faces_) {
      if (face.alive) verts.insert(face.v.begin(), face.v.end());
    }
    out.indices.assign(verts.begin(), verts.end());
    return out;
  }

 private:
  struct Face {
    std::array<int, 3> v;
    Eigen::Vector3d normal;
    double offset = 0.0;
    std::vector<int> outside;
    bool alive = true;
  };

  double dist(const Face& f, int i) const { return f.normal.dot(p_[i]) - f.offset; }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    Eigen::Vector3d nrm = (p_[b] - p_[a]).cross(p_[c] - p_[a]);
    const double len = nrm.norm();
    f.normal = len > 0.0 ? Eigen::Vector3d(nrm / len) : Eigen::Vector3d::Zero();
    f.offset = f.normal.dot(p_[a]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size()) - 1;
    edges_[{a, b}] = id;
    edges_[{b, c}] = id;
    edges_[{c, a}] = id;
    return id;
  }

  void kill_face(int id) {
    auto& f = faces_[id];
    f.alive = false;
    for (int k = 0; k < 3; ++k) {
      auto it = edges_.find({f.v[k], f.v[(k + 1) % 3]});
      if (it != edges_.end() && it->second == id) edges_.erase(it);
    }
  }

  bool initial_simplex() {
    if (n_ < 4) return false;
    // Widest pair among the six axis extremes.
    std::array<int, 6> ext{};
    for (int ax = 0; ax < 3; ++ax) {
      int lo = 0, hi = 0;
      for (int i = 1; i < n_; ++i) {
        if (p_[i][ax] < p_[lo][ax]) lo = i;
        if (p_[i][ax] > p_[hi][ax]) hi = i;
      }
      ext[2 * ax] = lo;
      ext[2 * ax + 1] = hi;
    }
    int i0 = ext[0], i1 = ext[1];
    double best = -1.0;
    for (int a : ext) {
      for (int b : ext) {
        const double d = (p_[a] - p_[b]).squaredNorm();
        if (d > best) {
          best = d;
          i0 = a;
          i1 = b;
        }
      }
    }
    if (best <= eps_ * eps_) return false;
    const Eigen::Vector3d dir = (p_[i1] - p_[i0]).normalized();
    int i2 = -1;
    best = eps_;
    for (int i = 0; i < n_; ++i) {
      const Eigen::Vector3d w = p_[i] - p_[i0];
      const double d = (w - w.dot(dir) * dir).norm();
      if (d > best) {
        best = d;
        i2 = i;
      }
    }
    if (i2 < 0) return false;
    const Eigen::Vector3d nrm = (p_[i1] - p_[i0]).cross(p_[i2] - p_[i0]).normalized();
    int i3 = -1;
    best = eps_;
    for (int i = 0; i < n_; ++i) {
      const double d = std::abs(nrm.dot(p_[i] - p_[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
    if (i3 < 0) return false;

    const Eigen::Vector3d centroid = (p_[i0] + p_[i1] + p_[i2] + p_[i3]) / 4.0;
    const std::array<std::array<int, 3>, 4> tri{{{i0, i1, i2}, {i0, i1, i3}, {i0, i2, i3}, {i1, i2, i3}}};
    for (auto t : tri) {
      const Eigen::Vector3d fn = (p_[t[1]] - p_[t[0]]).cross(p_[t[2]] - p_[t[0]]);
      if (fn.dot(centroid - p_[t[0]]) > 0.0) std::swap(t[1], t[2]);
      make_face(t[0], t[1], t[2]);
    }
    std::vector<int> all;
    for (int i = 0; i < n_; ++i) {
      if (i != i0 && i != i1 && i != i2 && i != i3) all.push_back(i);
    }
    assign(all, {0, 1, 2, 3});
    return true;
  }

  void assign(const std::vector<int>& pts, const std::vector<int>& candidates) {
    for (int i : pts) {
      int best_face = -1;
      double best = eps_;
      for (int f : candidates) {
        const double d = dist(faces_[f], i);
        if (d > best) {
          best = d;
          best_face = f;
        }
      }
      if (best_face >= 0) faces_[best_face].outside.push_back(i);
    }
  }

  int farthest(int f) const {
    const auto& out = faces_[f].outside;
    int arg = out.front();
    double best = dist(faces_[f], arg);
    for (int i : out) {
      const double d = dist(faces_[f], i);
      if (d > best) {
        best = d;
        arg = i;
      }
    }
    return arg;
  }

  std::vector<int> add_point(int start, int apex) {
    std::vector<int> visible{start};
    std::set<int> seen{start};
    std::deque<int> queue{start};
    while (!queue.empty()) {
      const int f = queue.front();
      queue.pop_front();
      for (int k = 0; k < 3; ++k) {
        auto it = edges_.find({faces_[f].v[(k + 1) % 3], faces_[f].v[k]});
        if (it == edges_.end()) continue;
        const int g = it->second;
        if (!faces_[g].alive || seen.count(g)) continue;
        seen.insert(g);
        if (dist(faces_[g], apex) > eps_) {
          visible.push_back(g);
          queue.push_back(g);
        }
      }
    }
    std::vector<std::pair<int, int>> horizon;
    std::vector<int> orphans;
    const std::set<int> vis(visible.begin(), visible.end());
    for (int f : visible) {
      for (int k = 0; k < 3; ++k) {
        const int a = faces_[f].v[k];
        const int b = faces_[f].v[(k + 1) % 3];
        auto it = edges_.find({b, a});
        if (it == edges_.end() || !vis.count(it->second)) horizon.emplace_back(a, b);
      }
      for (int i : faces_[f].outside) {
        if (i != apex) orphans.push_back(i);
      }
      faces_[f].outside.clear();
    }
    for (int f : visible) kill_face(f);
    std::vector<int> created;
    created.reserve(horizon.size());
    for (auto [a, b] : horizon) created.push_back(make_face(a, b, apex));
    assign(orphans, created);
    return created;
  }

  int n_;
  double eps_ = 0.0;
  std::vector<Eigen::Vector3d> p_;
  std::vector<Face> faces_;
  std::map<std::pair<int, int>, int> edges_;
};

/// L1 distance from `target` to the convex hull of `pts`, by linear
/// programming with explicit positive and negative residual columns.
/// Also returns the hull weights of the closest point found.
struct HullDistance {
  double l1 = 0.0;
  Vector weights;
};

inline HullDistance hull_l1_distance(const std::vector<Vector>& pts, const Vector& target) {
  const int J = static_cast<int>(pts.size());
  const int s = static_cast<int>(target.size());
  Matrix A = Matrix::Zero(s + 1, J + 2 * s);
  Vector b(s + 1);
  Vector c = Vector::Zero(J + 2 * s);
  for (int j = 0; j < J; ++j) {
    A.block(0, j, s, 1) = pts[j];
    A(s, j) = 1.0;
  }
  for (int i = 0; i < s; ++i) {
    A(i, J + i) = 1.0;
    A(i, J + s + i) = -1.0;
    c[J + i] = 1.0;
    c[J + s + i] = 1.0;
  }
  b.head(s) = target;
  b[s] = 1.0;
  const LpResult r = DenseSimplex().solve(A, b, c);
  HullDistance out;
  out.l1 = r.status == LpStatus::optimal ? std::max(0.0, r.objective) : std::numeric_limits<double>::infinity();
  out.weights = r.x.size() == A.cols() ? Vector(r.x.head(J)) : Vector::Zero(J);
  return out;
}

/// Extreme points in any dimension: a point is a vertex when it stays more
/// than `tol` (L1) away from the hull of the remaining points.
inline HullVertices hull_vertices_lp(const std::vector<Vector>& pts, double tol = 1e-10) {
  HullVertices out;
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i) {
    std::vector<Vector> rest;
    rest.reserve(pts.size() - 1);
    for (int j = 0; j < n; ++j) {
      if (j != i) rest.push_back(pts[j]);
    }
    if (hull_l1_distance(rest, pts[i]).l1 > tol) out.indices.push_back(i);
  }
  out.degenerate = static_cast<int>(out.indices.size()) <= (pts.empty() ? 0 : pts[0].size());
  return out;
}

inline HullVertices hull_vertices(const std::vector<Vector>& pts) {
  if (pts.empty()) return {{}, true};
  const auto dim = pts[0].size();
  if (dim == 2) return hull_vertices_2d(pts);
  if (dim == 3) return QuickHull3(pts).run();
  return hull_vertices_lp(pts);
}

}  // namespace momentcert::detail
