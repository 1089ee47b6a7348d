#pragma once

// Finite-dimensional real Hilbert space H = R^n with the Euclidean inner
// product. Vectors and operators are dense Eigen objects; the adjoint is the
// transpose.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "crgn/error.hpp"

namespace crgn {

using Vector = Eigen::VectorXd;
using Operator = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

inline std::string dims(Index a, Index b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace detail

inline void require_same_dim(Index a, Index b, const char* where) {
  if (a != b) {
    throw DimensionError(std::string(where) + ": dimension mismatch (" + detail::dims(a, b) + ")");
  }
}

inline void require_square(const Operator& A, const char* where) {
  if (A.rows() != A.cols()) {
    throw DimensionError(std::string(where) + ": operator is not square (" +
                         detail::dims(A.rows(), A.cols()) + ")");
  }
}

/// Throws NonFiniteError naming the first offending component.
inline void require_finite(const Vector& v, const char* what) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NonFiniteError(std::string(what) + ": component " + std::to_string(i) +
                           " is not finite");
    }
  }
}

inline void require_finite(const Operator& A, const char* what) {
  for (Index j = 0; j < A.cols(); ++j) {
    for (Index i = 0; i < A.rows(); ++i) {
      if (!std::isfinite(A(i, j))) {
        throw NonFiniteError(std::string(what) + ": entry (" + std::to_string(i) + "," +
                             std::to_string(j) + ") is not finite");
      }
    }
  }
}

inline double inner(const Vector& u, const Vector& v) {
  require_same_dim(u.size(), v.size(), "inner");
  return u.dot(v);
}

inline Vector apply(const Operator& A, const Vector& v) {
  require_same_dim(A.cols(), v.size(), "apply");
  return A * v;
}

inline Operator adjoint(const Operator& A) {
  require_square(A, "adjoint");
  return A.transpose();
}

inline Operator identity(Index n) { return Operator::Identity(n, n); }

/// Cholesky factorization L L^T = A + shift*I of a symmetric positive definite
/// operator. Only the lower triangle of A is read.
class Cholesky {
 public:
  Cholesky(const Operator& A, double shift = 0.0) : L_(A.rows(), A.cols()) {
    require_square(A, "Cholesky");
    const Index n = A.rows();
    L_.setZero();
    double smallest = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      double d = A(j, j) + shift;
      for (Index k = 0; k < j; ++k) d -= L_(j, k) * L_(j, k);
      smallest = std::min(smallest, d);
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw FactorizationError("Cholesky: operator is not positive definite, pivot " +
                                     std::to_string(j) + " = " + std::to_string(d) +
                                     " (smallest pivot " + std::to_string(smallest) + ")",
                                 smallest);
      }
      const double ljj = std::sqrt(d);
      L_(j, j) = ljj;
      for (Index i = j + 1; i < n; ++i) {
        double s = A(i, j);
        for (Index k = 0; k < j; ++k) s -= L_(i, k) * L_(j, k);
        L_(i, j) = s / ljj;
      }
    }
  }

  Vector solve(const Vector& rhs) const {
    require_same_dim(L_.rows(), rhs.size(), "Cholesky::solve");
    const Index n = L_.rows();
    Vector y = rhs;
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < i; ++k) y[i] -= L_(i, k) * y[k];
      y[i] /= L_(i, i);
    }
    for (Index i = n - 1; i >= 0; --i) {
      for (Index k = i + 1; k < n; ++k) y[i] -= L_(k, i) * y[k];
      y[i] /= L_(i, i);
    }
    return y;
  }

  /// Inverse of the factored operator, one column at a time.
  Operator inverse() const {
    const Index n = L_.rows();
    Operator inv(n, n);
    for (Index j = 0; j < n; ++j) inv.col(j) = solve(Vector::Unit(n, j));
    return inv;
  }

  const Operator& lower() const { return L_; }

 private:
  Operator L_;
};

/// Solves (A + eps I) y = rhs for A + eps I symmetric positive definite.
inline Vector solve_regularized(const Operator& A, double eps, const Vector& rhs) {
  if (!(eps > 0.0)) throw DomainError("solve_regularized: eps must be positive");
  require_same_dim(A.rows(), rhs.size(), "solve_regularized");
  return Cholesky(A, eps).solve(rhs);
}

/// (A + eps I)^{-1}.
inline Operator regularized_inverse(const Operator& A, double eps) {
  if (!(eps > 0.0)) throw DomainError("regularized_inverse: eps must be positive");
  return Cholesky(A, eps).inverse();
}

struct PowerIterationOptions {
  double tolerance = 1e-6;
  int max_iterations = 100000;
  std::uint64_t seed = 0x5eed;
};

/// Spectral norm by power iteration on A^T A.
///
/// Stops when the eigen-residual of A^T A drops below tolerance * rho, or when
/// the Rayleigh quotient (nondecreasing for a PSD operator) changes by less
/// than 1e-12 relative. The second rule covers clustered leading singular
/// values, where the residual decays slowly but the quotient is already
/// accurate to about sqrt(change).
///
/// Iterates with A^T A - sigma I, sigma a Gershgorin lower bound on the
/// spectrum. That leaves the dominant eigenvector unchanged and speeds up
/// near-orthogonal A (all singular values close together) by orders of magnitude.
inline double op_norm(const Operator& A, const PowerIterationOptions& opt = {}) {
  if (A.size() == 0) return 0.0;
  const Index n = A.cols();
  const Operator S = A.transpose() * A;
  double sigma = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) sigma = std::min(sigma, 2.0 * S(i, i) - S.col(i).cwiseAbs().sum());
  sigma = std::max(sigma, 0.0);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();

  double rho = 0.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector w = S * v;
    const double next = v.dot(w);
    if (next <= 0.0) {
      // v is in the null space of A; either A = 0 or the start vector was unlucky.
      if (A.cwiseAbs().maxCoeff() == 0.0) return 0.0;
      v = Vector::Ones(n).normalized();
      continue;
    }
    const double residual = (w - next * v).norm();
    const bool stagnant = it > 0 && std::abs(next - rho) <= 1e-12 * next;
    rho = next;
    if (residual <= opt.tolerance * rho || stagnant) return std::sqrt(rho);
    const Vector shifted = w - sigma * v;
    v = shifted / shifted.norm();
  }
  throw ConvergenceError("op_norm: power iteration did not converge", std::sqrt(rho));
}

}  // namespace crgn
