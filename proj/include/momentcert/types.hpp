#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace momentcert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in moment space R^s.
using MomentVector = Eigen::VectorXd;

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;
using MatrixField = std::function<Matrix(const Vector&)>;

// ---------------------------------------------------------------------------
// Errors. Every failure that is not a verdict is reported by exception.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes disagree with the basis or problem.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A measure whose weights are negative or do not sum to one.
class InvalidMeasureError : public Error {
 public:
  using Error::Error;
};

/// A moment vector that no probability measure on K realizes.
class NotRepresentableError : public Error {
 public:
  using Error::Error;
};

/// A certificate was asked to run on input that violates its structural
/// hypotheses (singular Q1, nonzero linear components, K straddling 0, ...).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// The linear section {m in Lambda : Q m = xi} is empty. Carries the
/// attainable box of Q(x) Lambda so callers can report it.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, Vector lower, Vector upper)
      : Error(what), lower_(std::move(lower)), upper_(std::move(upper)) {}

  const Vector& attainable_lower() const { return lower_; }
  const Vector& attainable_upper() const { return upper_; }

 private:
  Vector lower_;
  Vector upper_;
};

/// State integration left the configured bound.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed problem file or inconsistent options.
class InputError : public Error {
 public:
  using Error::Error;
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace momentcert
