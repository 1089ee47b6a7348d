#pragma once

// Fixed-step explicit integration (Euler, classical RK4) of the direct flow
// and of the coupled (x, B) system, with ball-exit and divergence monitors.

#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crgn/flow.hpp"

namespace crgn {

enum class Method { euler, rk4 };

inline std::string_view to_string(Method m) { return m == Method::euler ? "euler" : "rk4"; }

inline Method parse_method(std::string_view s) {
  if (s == "euler") return Method::euler;
  if (s == "rk4") return Method::rk4;
  throw DomainError("unknown integration method '" + std::string(s) + "'");
}

/// States the explicit steppers can combine linearly.
template <class S>
concept StepState = requires(S a, S b, double h) {
  { a + h * b } -> std::convertible_to<S>;
};

/// One explicit step of y' = rhs(t, y). RK4 evaluates at t, t + h/2, t + h.
template <StepState S, class Rhs>
S step(const Rhs& rhs, const S& y, double t, double h, Method method) {
  if (!(h > 0.0)) throw DomainError("step: h must be positive");
  if (method == Method::euler) return S(y + h * rhs(t, y));
  const S k1 = rhs(t, y);
  const S k2 = rhs(t + 0.5 * h, S(y + (0.5 * h) * k1));
  const S k3 = rhs(t + 0.5 * h, S(y + (0.5 * h) * k2));
  const S k4 = rhs(t + h, S(y + h * k3));
  return S(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// (x, B) treated as one flat block; B is empty for the direct flow.
struct Phase {
  Vector x;
  Operator B;

  friend Phase operator+(const Phase& a, const Phase& b) { return {a.x + b.x, a.B + b.B}; }
  friend Phase operator*(double h, const Phase& a) { return {h * a.x, h * a.B}; }

  bool finite() const { return x.allFinite() && B.allFinite(); }
};

struct Monitors {
  bool ball_exit = false;
  bool divergence = true;
};

inline constexpr double kDivergenceThreshold = 1e12;

struct IntegratorConfig {
  Method method = Method::rk4;
  double step_h = 0.01;
  double horizon_T = 10.0;
  int record_every = 1;
  Monitors monitors;
  /// Gain on B'; 1 everywhere the theory applies.
  double inverse_gain = 1.0;
};

enum class Termination { horizon_reached, ball_exit, divergence, numerical_error };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::horizon_reached: return "horizon_reached";
    case Termination::ball_exit: return "ball_exit";
    case Termination::divergence: return "divergence";
    case Termination::numerical_error: return "numerical_error";
  }
  return "unknown";
}

struct Record {
  SolverState state;
  FlowDiagnostics diag;
};

struct Trajectory {
  std::vector<Record> records;
  Termination termination = Termination::horizon_reached;
  IntegratorConfig config;
  std::string message;
};

namespace detail {

inline void validate(const IntegratorConfig& cfg) {
  if (!(cfg.step_h > 0.0)) throw DomainError("IntegratorConfig: step_h must be positive");
  if (!(cfg.horizon_T >= cfg.step_h)) throw DomainError("IntegratorConfig: horizon_T must be >= step_h");
  if (cfg.record_every < 1) throw DomainError("IntegratorConfig: record_every must be >= 1");
}

inline long step_count(const IntegratorConfig& cfg) {
  return static_cast<long>(std::ceil(cfg.horizon_T / cfg.step_h - 1e-9));
}

inline Phase to_phase(const SolverState& st) { return {st.x, st.B ? *st.B : Operator()}; }

inline SolverState to_state(const Phase& ph, double t, bool coupled) {
  SolverState st{t, ph.x, std::nullopt};
  if (coupled) st.B = ph.B;
  return st;
}

/// Right-hand side of whichever flow `coupled` selects, as a Phase.
inline auto make_rhs(const NonlinearProblem& p, const Schedule& s, const Vector& x0, bool coupled,
                     double gain) {
  return [&p, &s, &x0, coupled, gain](double t, const Phase& y) -> Phase {
    if (!coupled) return {direct_rhs(p, s, x0, y.x, t), Operator()};
    const SolverState st{t, y.x, y.B};
    CoupledRate r = coupled_rhs(p, s, x0, st, gain);
    return {std::move(r.dx), std::move(r.dB)};
  };
}

}  // namespace detail

/// Integrates from st0 (at t = 0) to horizon_T. The flow is the coupled system
/// when st0 carries B and the direct flow otherwise; x0 = st0.x is the anchor.
///
/// Records are taken at t_k = k * record_every * h, at the final step, and at
/// the step that trips a monitor. The ball monitor fires when
/// ||x(t) - xhat|| >= R eps(t) and needs both xhat and R. The divergence
/// monitor fires when ||x|| or the Frobenius norm of B exceeds 1e12. A failed
/// or non-finite step ends the run as numerical_error with the last finite
/// state as its final record.
inline Trajectory integrate(const NonlinearProblem& p, const Schedule& s, const SolverState& st0,
                            const IntegratorConfig& cfg, const std::optional<Vector>& xhat = std::nullopt,
                            std::optional<double> R = std::nullopt) {
  detail::validate(cfg);
  require_same_dim(p.dim, st0.x.size(), "integrate");
  if (st0.B && (st0.B->rows() != p.dim || st0.B->cols() != p.dim)) {
    throw DimensionError("integrate: B(0) has wrong shape");
  }
  if (xhat) require_same_dim(p.dim, xhat->size(), "integrate xhat");
  if (cfg.monitors.ball_exit && (!xhat || !R)) {
    throw DomainError("integrate: the ball monitor needs xhat and R");
  }

  const bool coupled = st0.B.has_value();
  const Vector x0 = st0.x;
  const auto rhs = detail::make_rhs(p, s, x0, coupled, cfg.inverse_gain);
  std::optional<ReferenceGram> ref;
  if (xhat) ref.emplace(p, *xhat);

  Trajectory traj;
  traj.config = cfg;
  auto record = [&](const Phase& ph, double t) {
    SolverState st = detail::to_state(ph, t, coupled);
    FlowDiagnostics d = diagnostics(p, s, st, ref ? &*ref : nullptr);
    traj.records.push_back({std::move(st), std::move(d)});
  };
  auto outside_ball = [&](const Phase& ph, double t) {
    return cfg.monitors.ball_exit && (ph.x - *xhat).norm() >= *R * s.eps(t);
  };

  Phase y = detail::to_phase(st0);
  record(y, 0.0);
  if (outside_ball(y, 0.0)) {
    traj.termination = Termination::ball_exit;
    return traj;
  }

  const long steps = detail::step_count(cfg);
  const double h = cfg.step_h;
  for (long k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * h;
    const double t = static_cast<double>(k) * h;
    Phase next;
    try {
      next = step(rhs, y, t_prev, h, cfg.method);
    } catch (const Error& e) {
      traj.termination = Termination::numerical_error;
      traj.message = e.what();
      if (traj.records.back().state.t != t_prev) record(y, t_prev);
      return traj;
    }
    if (!next.finite()) {
      traj.termination = Termination::numerical_error;
      traj.message = "non-finite state at t=" + std::to_string(t);
      if (traj.records.back().state.t != t_prev) record(y, t_prev);
      return traj;
    }
    y = std::move(next);
    if (cfg.monitors.divergence &&
        (y.x.norm() > kDivergenceThreshold || y.B.norm() > kDivergenceThreshold)) {
      traj.termination = Termination::divergence;
      record(y, t);
      return traj;
    }
    if (outside_ball(y, t)) {
      traj.termination = Termination::ball_exit;
      record(y, t);
      return traj;
    }
    if (k % cfg.record_every == 0 || k == steps) record(y, t);
  }
  return traj;
}

/// Final (x, B) only, without diagnostics or monitors.
inline Phase advance(const NonlinearProblem& p, const Schedule& s, const SolverState& st0,
                     Method method, double h, long steps, double gain = 1.0) {
  const bool coupled = st0.B.has_value();
  const Vector x0 = st0.x;
  const auto rhs = detail::make_rhs(p, s, x0, coupled, gain);
  Phase y = detail::to_phase(st0);
  for (long k = 1; k <= steps; ++k) y = step(rhs, y, static_cast<double>(k - 1) * h, h, method);
  return y;
}

struct OrderSample {
  double h = 0.0;
  double endpoint_error = 0.0;
};

/// Endpoint errors at each step size against an RK4 reference computed with
/// the smallest step divided by 4. Every step must divide horizon_T.
inline std::vector<OrderSample> convergence_order(const NonlinearProblem& p, const Schedule& s,
                                                  const SolverState& st0, const IntegratorConfig& cfg,
                                                  const std::vector<double>& steps) {
  if (steps.empty()) throw DomainError("convergence_order: no step sizes");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0)) throw DomainError("convergence_order: steps must be positive");
    if (i > 0 && !(steps[i] < steps[i - 1])) throw DomainError("convergence_order: steps must be descending");
  }
  auto count = [&](double h) {
    const double q = cfg.horizon_T / h;
    const long n = std::lround(q);
    if (std::abs(q - static_cast<double>(n)) > 1e-9 * q) {
      throw DomainError("convergence_order: step " + std::to_string(h) + " does not divide the horizon");
    }
    return n;
  };
  const double h_ref = steps.back() / 4.0;
  const Phase ref = advance(p, s, st0, Method::rk4, h_ref, count(h_ref), cfg.inverse_gain);

  std::vector<OrderSample> out;
  for (double h : steps) {
    const Phase y = advance(p, s, st0, cfg.method, h, count(h), cfg.inverse_gain);
    const double dx = (y.x - ref.x).squaredNorm();
    const double dB = y.B.size() ? (y.B - ref.B).squaredNorm() : 0.0;
    out.push_back({h, std::sqrt(dx + dB)});
  }
  return out;
}

}  // namespace crgn
