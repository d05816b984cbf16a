#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "momentcert/basis.hpp"

namespace momentcert {

inline constexpr double kWeightSumTolerance = 1e-12;

/// Finite-support probability measure on K.
struct DiscreteMeasure {
  std::vector<Vector> atoms;
  std::vector<double> weights;

  static DiscreteMeasure dirac(Vector u) { return {{std::move(u)}, {1.0}}; }
  static DiscreteMeasure dirac(double u) { return dirac(Vector::Constant(1, u)); }

  std::size_t size() const { return atoms.size(); }

  double weight_sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

/// Throws InvalidMeasureError unless weights are nonnegative and sum to one,
/// and (when K is given) every atom lies in K.
inline void validate_measure(const DiscreteMeasure& mu, int control_dim,
                             const CompactControlSet* K = nullptr, double atom_tol = 1e-12) {
  if (mu.atoms.size() != mu.weights.size() || mu.atoms.empty()) {
    throw InvalidMeasureError("measure needs one weight per atom and at least one atom");
  }
  for (std::size_t j = 0; j < mu.size(); ++j) {
    require_dim(mu.atoms[j].size(), control_dim, "measure atom");
    if (!(mu.weights[j] >= 0.0) || !std::isfinite(mu.weights[j])) {
      throw InvalidMeasureError("measure weight " + std::to_string(j) + " is negative or not finite");
    }
    if (K != nullptr && !K->contains(mu.atoms[j], atom_tol)) {
      throw InvalidMeasureError("measure atom " + std::to_string(j) + " lies outside K");
    }
  }
  const double total = mu.weight_sum();
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw InvalidMeasureError("measure weights sum to " + std::to_string(total) + ", not 1");
  }
}

inline MomentVector moments_of(const ControlBasis& basis, const DiscreteMeasure& mu) {
  validate_measure(mu, basis.control_dim());
  if (mu.size() == 1) return phi_eval(basis, mu.atoms[0]);
  MomentVector m = MomentVector::Zero(basis.moment_dim());
  for (std::size_t j = 0; j < mu.size(); ++j) m += mu.weights[j] * phi_eval(basis, mu.atoms[j]);
  return m;
}

/// Drops zero-weight atoms and then removes atoms until at most s + 1 remain,
/// keeping the moment vector fixed. Each round moves weight along a null
/// vector of the (s+1) x k matrix [phi(u_j); 1] until one weight hits zero.
inline DiscreteMeasure reduce_caratheodory(const ControlBasis& basis, DiscreteMeasure mu,
                                           double zero_weight = 1e-15) {
  auto prune = [&]() {
    DiscreteMeasure out;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      if (mu.weights[j] > zero_weight) {
        out.atoms.push_back(mu.atoms[j]);
        out.weights.push_back(mu.weights[j]);
      }
    }
    mu = std::move(out);
  };
  prune();
  const int rows = basis.moment_dim() + 1;
  while (static_cast<int>(mu.size()) > rows) {
    const int k = static_cast<int>(mu.size());
    Matrix A(rows, k);
    for (int j = 0; j < k; ++j) {
      A.block(0, j, rows - 1, 1) = phi_eval(basis, mu.atoms[j]);
      A(rows - 1, j) = 1.0;
    }
    Eigen::FullPivLU<Matrix> lu(A);
    Matrix kernel = lu.kernel();
    Vector z = kernel.col(0);
    if (z.maxCoeff() <= 0.0) z = -z;
    double step = std::numeric_limits<double>::infinity();
    int hit = -1;
    for (int j = 0; j < k; ++j) {
      if (z[j] > 0.0 && mu.weights[j] / z[j] < step) {
        step = mu.weights[j] / z[j];
        hit = j;
      }
    }
    for (int j = 0; j < k; ++j) mu.weights[j] -= step * z[j];
    mu.weights[hit] = 0.0;
    prune();
  }
  const double total = mu.weight_sum();
  for (double& w : mu.weights) w /= total;
  return mu;
}

}  // namespace momentcert
