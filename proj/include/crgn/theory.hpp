#pragma once

// Constants and hypothesis checks of the convergence theorem for the coupled
// flow, and numerical checks of its two auxiliary lemmas (the Riccati-type
// envelope v < 1/mu and the operator Gronwall bound).

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "crgn/flow.hpp"
#include "crgn/integrator.hpp"

namespace crgn {

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

struct KResult {
  double k = 0.0;
  double Lambda0_norm = 0.0;
};

/// k = 2 N1 N2 R + b + eps0 ||B0|| + ||I - B0 [F'(xhat)* F'(xhat) + eps0 I]||.
inline KResult compute_k(double N1, double N2, double R, double b, double eps0, const Operator& B0,
                         const NonlinearProblem& p, const Vector& xhat) {
  require_same_dim(p.dim, xhat.size(), "compute_k");
  if (B0.rows() != p.dim || B0.cols() != p.dim) throw DimensionError("compute_k: B0 has wrong shape");
  Operator lambda0 = -B0 * gauss_newton_operator(p, xhat, eps0);
  lambda0.diagonal().array() += 1.0;
  const double l0 = op_norm(lambda0);
  return {2.0 * N1 * N2 * R + b + eps0 * op_norm(B0) + l0, l0};
}

/// The smallest R for which 1/R <= lambda holds, i.e.
/// R = (1 - b - eps0||B0|| - ||Lambda0|| - b eps0) / ((5 + 3 eps0||B0||) N1 N2).
inline double canonical_R(double N1, double N2, double b, double eps0, double B0_norm,
                          double Lambda0_norm) {
  const double numerator = 1.0 - b - eps0 * B0_norm - Lambda0_norm - b * eps0;
  if (!(numerator > 0.0)) {
    throw DomainError("canonical_R: constants too large for the convergence theorem (numerator " +
                      std::to_string(numerator) + ")");
  }
  const double denominator = (5.0 + 3.0 * eps0 * B0_norm) * N1 * N2;
  if (!(denominator > 0.0)) throw DomainError("canonical_R: N1 * N2 must be positive");
  return numerator / denominator;
}

struct SourceSolution {
  Vector w;
  double residual = 0.0;
  bool in_range = false;
};

inline constexpr double kSourceTolerance = 1e-8;

/// Minimum-norm w with F'(xhat)* F'(xhat) w = xhat - x0, from the eigen-
/// decomposition of the Gram operator with eigenvalues below
/// tol * (largest eigenvalue) discarded. The range of a compact Gram operator
/// is not closed, so membership is decided by thresholding the residual:
/// in_range iff residual <= tol * ||xhat - x0||.
inline SourceSolution solve_source(const NonlinearProblem& p, const Vector& xhat, const Vector& x0,
                                   double tol = kSourceTolerance) {
  require_same_dim(p.dim, xhat.size(), "solve_source");
  require_same_dim(p.dim, x0.size(), "solve_source");
  const Vector rhs = xhat - x0;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return {Vector::Zero(p.dim), 0.0, true};

  const Operator J = jacobian(p, xhat);
  const Operator gram = J.transpose() * J;
  const Eigen::SelfAdjointEigenSolver<Operator> eig(gram);
  const Vector& values = eig.eigenvalues();
  const Operator& vectors = eig.eigenvectors();
  const double cutoff = tol * values.cwiseAbs().maxCoeff();

  Vector w = Vector::Zero(p.dim);
  for (Index i = 0; i < values.size(); ++i) {
    if (values[i] > cutoff) w += (vectors.col(i).dot(rhs) / values[i]) * vectors.col(i);
  }
  const double residual = (gram * w - rhs).norm();
  return {std::move(w), residual, residual <= tol * rhs_norm};
}

struct CertificateChecks {
  /// k + b eps0 < 1
  bool contraction = false;
  /// 1/R <= lambda
  bool radius_lower = false;
  /// lambda < (1 - k - b eps0) / (2 (k + 2 + eps0||B0||) ||w||); vacuous for w = 0
  bool source_size = false;
  /// lambda < eps0 / ||x0 - xhat||; vacuous for x0 = xhat
  bool initial_distance = false;
  /// xhat - x0 in the range of F'(xhat)* F'(xhat), up to the residual threshold
  bool source_range = false;
  /// The bounds were sampled on a ball that contains U(xhat, R eps0)
  bool bounds_cover_ball = false;
};

struct Certificate {
  double N1 = 0.0;
  double N2 = 0.0;
  double b = 0.0;
  double eps0 = 0.0;
  double B0_norm = 0.0;
  double Lambda0_norm = 0.0;
  double k = 0.0;
  double R = 0.0;
  double lambda = 0.0;
  Vector w;
  double w_norm = 0.0;
  double source_residual = 0.0;
  double x0_distance = 0.0;
  int bound_samples = 0;
  double bound_inflation = 1.0;
  CertificateChecks checks;
  bool overall = false;
  std::vector<std::string> notes;
};

struct CertifyOptions {
  double source_tol = kSourceTolerance;
  /// Relative slack on 1/R <= lambda, which holds with equality at canonical R.
  double radius_slack = 1e-12;
};

/// Evaluates every hypothesis of the convergence theorem for one instance.
/// Failures are recorded in the checks, never thrown.
inline Certificate certify(const NonlinearProblem& p, const Vector& xhat, const Vector& x0,
                           const Schedule& s, const Operator& B0, const BallBounds& bounds, double R,
                           const CertifyOptions& opt = {}) {
  Certificate c;
  c.N1 = bounds.N1;
  c.N2 = bounds.N2;
  c.bound_samples = bounds.samples;
  c.bound_inflation = bounds.inflation;
  c.b = s.b_constant();
  c.eps0 = s.eps(0.0);
  c.R = R;
  c.B0_norm = op_norm(B0);
  const KResult kr = compute_k(c.N1, c.N2, R, c.b, c.eps0, B0, p, xhat);
  c.k = kr.k;
  c.Lambda0_norm = kr.Lambda0_norm;

  const SourceSolution src = solve_source(p, xhat, x0, opt.source_tol);
  c.w = src.w;
  c.w_norm = src.w.norm();
  c.source_residual = src.residual;
  c.x0_distance = (x0 - xhat).norm();

  const double e = c.eps0 * c.B0_norm;
  const double margin = 1.0 - c.k - c.b * c.eps0;
  c.checks.contraction = margin > 0.0;
  c.lambda = margin > 0.0 ? 3.0 * c.N1 * c.N2 * (1.0 + e) / margin
                          : std::numeric_limits<double>::infinity();
  c.checks.radius_lower = R > 0.0 && 1.0 / R <= c.lambda * (1.0 + opt.radius_slack);
  c.checks.source_size =
      margin > 0.0 && (c.w_norm == 0.0 || c.lambda < margin / (2.0 * (c.k + 2.0 + e) * c.w_norm));
  c.checks.initial_distance =
      margin > 0.0 && (c.x0_distance == 0.0 || c.lambda < c.eps0 / c.x0_distance);
  c.checks.source_range = src.in_range;
  c.checks.bounds_cover_ball =
      bounds.center.size() == xhat.size() &&
      bounds.radius - (bounds.center - xhat).norm() >= R * c.eps0;

  c.overall = c.checks.contraction && c.checks.radius_lower && c.checks.source_size &&
              c.checks.initial_distance && c.checks.source_range && c.checks.bounds_cover_ball;

  c.notes.push_back("N1, N2 are sampled estimates (" + std::to_string(bounds.samples) +
                    " points, inflation " + std::to_string(bounds.inflation) + "), not proofs");
  if (c.w_norm > 0.0) c.notes.push_back("w is the minimum-norm source element");
  return c;
}

struct CanonicalCertificate {
  BallBounds bounds;
  double R = 0.0;
  Certificate certificate;
};

/// certify() at the canonical R. The bounds must hold on U(xhat, R eps0)
/// while R depends on them, so the sampled ball grows until it covers the one
/// the certificate needs (at most 8 passes). N2 is floored at
/// curvature_floor * N1: any upper bound is valid and affine F would
/// otherwise give an infinite R. Throws when canonical_R does.
inline CanonicalCertificate certify_canonical(const NonlinearProblem& p, const Vector& xhat,
                                              const Vector& x0, const Schedule& s, const Operator& B0,
                                              int samples, std::uint64_t seed,
                                              double curvature_floor = 1e-6) {
  const double eps0 = s.eps(0.0);
  const double B0_norm = op_norm(B0);
  const double Lambda0 = compute_k(0.0, 0.0, 0.0, 0.0, eps0, B0, p, xhat).Lambda0_norm;
  CanonicalCertificate out;
  double radius = std::max(1.0, 2.0 * (x0 - xhat).norm());
  for (int pass = 0; pass < 8; ++pass) {
    out.bounds = estimate_bounds(p, xhat, radius, samples, seed);
    out.bounds.N2 = std::max(out.bounds.N2, curvature_floor * out.bounds.N1);
    out.R = canonical_R(out.bounds.N1, out.bounds.N2, s.b_constant(), eps0, B0_norm, Lambda0);
    if (out.R * eps0 <= radius) break;
    radius = out.R * eps0;
  }
  out.certificate = certify(p, xhat, x0, s, B0, out.bounds, out.R);
  return out;
}

// ---------------------------------------------------------------------------
// Riccati-type envelope
// ---------------------------------------------------------------------------

struct TimedValue {
  double t = 0.0;
  double v = 0.0;
};

/// True iff v(t) < 1/mu(t) at every sample.
inline bool riccati_envelope_check(const std::vector<TimedValue>& v_samples,
                                   const std::function<double(double)>& mu) {
  if (v_samples.empty()) throw DomainError("riccati_envelope_check: no samples");
  for (const TimedValue& s : v_samples) {
    if (!(s.v < 1.0 / mu(s.t))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Operator Gronwall bound
// ---------------------------------------------------------------------------

inline constexpr double kGronwallTolerance = 1e-6;

inline double smallest_symmetric_eigenvalue(const Operator& A) {
  const Operator sym = 0.5 * (A + A.transpose());
  return Eigen::SelfAdjointEigenSolver<Operator>(sym, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

/// Piecewise-linear interpolation of the smallest eigenvalue of the symmetric
/// part of A(t) at `samples` + 1 equally spaced times on [0, T]. For paths
/// affine in t the result is a lower bound everywhere, since the smallest
/// eigenvalue is concave along such paths.
inline std::function<double(double)> coercivity_profile(const std::function<Operator(double)>& A_path,
                                                        double T, int samples) {
  if (samples < 1 || !(T > 0.0)) throw DomainError("coercivity_profile: bad sampling");
  std::vector<double> values;
  for (int i = 0; i <= samples; ++i) values.push_back(smallest_symmetric_eigenvalue(A_path(T * i / samples)));
  return [values = std::move(values), T, samples](double t) {
    const double u = std::clamp(t / T, 0.0, 1.0) * samples;
    const int i = std::min(static_cast<int>(u), samples - 1);
    const double f = u - i;
    return (1.0 - f) * values[static_cast<std::size_t>(i)] + f * values[static_cast<std::size_t>(i) + 1];
  };
}

/// Integrates V' = G(t) - A(t) V with RK4 and returns
/// max_t ||V(t)|| - exp(-Int_0^t gamma) [Int_0^t ||G(s)|| exp(Int_0^s gamma) ds + ||V(0)||]
/// over the grid t_j = j h. Both integrals use the trapezoidal rule on the grid.
/// Throws if gamma(t) exceeds the smallest eigenvalue of the symmetric part of
/// A(t) at any grid time.
inline double gronwall_check(const std::function<Operator(double)>& A_path,
                             const std::function<Operator(double)>& G_path, const Operator& V0,
                             const std::function<double(double)>& gamma, double T, double h) {
  if (!(T > 0.0) || !(h > 0.0)) throw DomainError("gronwall_check: T and h must be positive");
  require_square(V0, "gronwall_check");
  const long steps = std::lround(T / h);
  if (steps < 1) throw DomainError("gronwall_check: h larger than T");

  auto rhs = [&](double t, const Operator& V) -> Operator { return G_path(t) - A_path(t) * V; };

  auto gamma_at = [&](double t) {
    const double g = gamma(t);
    const double floor = smallest_symmetric_eigenvalue(A_path(t));
    if (g > floor + 1e-10 * (1.0 + std::abs(floor))) {
      throw DomainError("gronwall_check: gamma is not a coercivity bound at t=" + std::to_string(t) +
                        " (gamma " + std::to_string(g) + " > " + std::to_string(floor) + ")");
    }
    return g;
  };

  Operator V = V0;
  const double v0 = op_norm(V0);
  double Gamma = 0.0;
  double forcing = 0.0;
  double gamma_prev = gamma_at(0.0);
  double weighted_prev = op_norm(G_path(0.0));
  double worst = op_norm(V) - v0;
  for (long j = 1; j <= steps; ++j) {
    const double t_prev = static_cast<double>(j - 1) * h;
    const double t = static_cast<double>(j) * h;
    V = step(rhs, V, t_prev, h, Method::rk4);
    const double g = gamma_at(t);
    const double Gamma_next = Gamma + 0.5 * h * (gamma_prev + g);
    const double weighted = op_norm(G_path(t)) * std::exp(Gamma_next);
    forcing += 0.5 * h * (weighted_prev + weighted);
    Gamma = Gamma_next;
    gamma_prev = g;
    weighted_prev = weighted;
    const double bound = std::exp(-Gamma) * (forcing + v0);
    worst = std::max(worst, op_norm(V) - bound);
  }
  return worst;
}

}  // namespace crgn
