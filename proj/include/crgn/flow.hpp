#pragma once

// Right-hand sides of the two continuous regularized Gauss-Newton methods:
//
//   direct:   x' = -(F'*F' + eps I)^{-1} [F'* F(x) + eps (x - x0)]
//   coupled:  x' = -B [F'* F(x) + eps (x - x0)]
//             B' = -[(F'*F' + eps I) B - I]
//
// The coupled system tracks the regularized inverse with B instead of
// factoring the Gauss-Newton operator at every evaluation.

#include <optional>

#include "crgn/hilbert.hpp"
#include "crgn/problem.hpp"
#include "crgn/schedule.hpp"

namespace crgn {

struct SolverState {
  double t = 0.0;
  Vector x;
  /// Absent for the direct flow.
  std::optional<Operator> B;
};

struct FlowDiagnostics {
  double eps = 0.0;
  double residual_norm = 0.0;
  std::optional<double> err_norm;
  std::optional<double> B_norm;
  std::optional<double> lambda_norm;
  std::optional<double> inverse_residual;
  std::optional<double> D_norm;
};

/// F'(x)* F'(x) + eps I.
inline Operator gauss_newton_operator(const NonlinearProblem& p, const Vector& x, double eps) {
  if (!(eps > 0.0)) throw DomainError("gauss_newton_operator: eps must be positive");
  const Operator J = jacobian(p, x);
  Operator M = J.transpose() * J;
  M.diagonal().array() += eps;
  return M;
}

/// F'(x)* F(x) + eps (x - x0), the bracket shared by both flows.
inline Vector regularized_gradient(const NonlinearProblem& p, const Operator& J, const Vector& x,
                                   const Vector& x0, double eps) {
  return J.transpose() * eval_F(p, x) + eps * (x - x0);
}

inline Vector direct_rhs(const NonlinearProblem& p, const Schedule& s, const Vector& x0,
                         const Vector& x, double t) {
  require_same_dim(p.dim, x.size(), "direct_rhs");
  require_same_dim(p.dim, x0.size(), "direct_rhs anchor");
  const double eps = s.eps(t);
  const Operator J = jacobian(p, x);
  return -solve_regularized(J.transpose() * J, eps, regularized_gradient(p, J, x, x0, eps));
}

struct CoupledRate {
  Vector dx;
  Operator dB;
};

/// (x', B') of the coupled system. `gain` scales B' and is 1 in every result
/// the convergence theory covers.
inline CoupledRate coupled_rhs(const NonlinearProblem& p, const Schedule& s, const Vector& x0,
                               const SolverState& st, double gain = 1.0) {
  if (!st.B) throw DomainError("coupled_rhs: state carries no inverse approximation B");
  const Operator& B = *st.B;
  require_same_dim(p.dim, st.x.size(), "coupled_rhs");
  require_same_dim(p.dim, x0.size(), "coupled_rhs anchor");
  if (B.rows() != p.dim || B.cols() != p.dim) throw DimensionError("coupled_rhs: B has wrong shape");

  const double eps = s.eps(st.t);
  const Operator J = jacobian(p, st.x);
  Operator M = J.transpose() * J;
  M.diagonal().array() += eps;

  CoupledRate rate;
  rate.dx = -(B * regularized_gradient(p, J, st.x, x0, eps));
  rate.dB = M * B;
  rate.dB.diagonal().array() -= 1.0;
  rate.dB *= -gain;
  return rate;
}

enum class InitialInverse {
  /// (F'(x0)* F'(x0) + eps0 I)^{-1}
  exact_inverse,
  /// I / (||F'(x0)||^2 + eps0), no factorization
  scaled_identity,
};

inline Operator initial_inverse(const NonlinearProblem& p, const Vector& x0, double eps0,
                                InitialInverse mode) {
  const Operator J = jacobian(p, x0);
  if (mode == InitialInverse::exact_inverse) return regularized_inverse(J.transpose() * J, eps0);
  const double n1 = op_norm(J);
  return identity(p.dim) / (n1 * n1 + eps0);
}

/// Precomputed F'(x-hat)* F'(x-hat) for repeated diagnostics along a run.
struct ReferenceGram {
  Vector xhat;
  Operator gram;

  ReferenceGram(const NonlinearProblem& p, const Vector& xh) : xhat(xh) {
    const Operator J = jacobian(p, xh);
    gram = J.transpose() * J;
  }
};

inline FlowDiagnostics diagnostics(const NonlinearProblem& p, const Schedule& s,
                                   const SolverState& st, const ReferenceGram* ref) {
  FlowDiagnostics d;
  d.eps = s.eps(st.t);
  d.residual_norm = eval_F(p, st.x).norm();
  if (ref) d.err_norm = (st.x - ref->xhat).norm();
  if (!st.B) return d;

  const Operator& B = *st.B;
  const Index n = p.dim;
  d.B_norm = op_norm(B);
  Operator residual = gauss_newton_operator(p, st.x, d.eps) * B;
  residual.diagonal().array() -= 1.0;
  d.inverse_residual = op_norm(residual);
  if (ref) {
    // Lambda(t) = I - B(t) [F'(xhat)* F'(xhat) + eps(t) I], taken at the fixed xhat.
    Operator shifted = ref->gram;
    shifted.diagonal().array() += d.eps;
    d.lambda_norm = op_norm(identity(n) - B * shifted);
    d.D_norm = op_norm(B * ref->gram);
  }
  return d;
}

inline FlowDiagnostics diagnostics(const NonlinearProblem& p, const Schedule& s,
                                   const SolverState& st, const std::optional<Vector>& xhat) {
  if (!xhat) return diagnostics(p, s, st, static_cast<const ReferenceGram*>(nullptr));
  const ReferenceGram ref(p, *xhat);
  return diagnostics(p, s, st, &ref);
}

}  // namespace crgn
