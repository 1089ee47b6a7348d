#pragma once

#include <stdexcept>
#include <string>

namespace crgn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the documented domain (negative time, bad schedule...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A value that must be finite is NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization met a non-positive pivot.
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& what, double smallest_pivot)
      : Error(what), smallest_pivot_(smallest_pivot) {}
  double smallest_pivot() const noexcept { return smallest_pivot_; }

 private:
  double smallest_pivot_;
};

/// An iterative estimate ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

/// A run configuration is invalid: unknown key or label, bad value, unwritable path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace crgn
