#pragma once

// Regularization schedules eps(t) > 0 decaying to zero, together with the
// constant b of the decay certificate |eps'(t)| <= b eps(t)^2.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "crgn/error.hpp"

namespace crgn {

/// Parameters of eps(t) = c0 (c1 + t)^(-a).
struct PowerLaw {
  double c0 = 0.1;
  double c1 = 1.0;
  double a = 1.0;
};

class Schedule {
 public:
  /// Default: eps(t) = 0.1 / (1 + t).
  Schedule() : Schedule(power_law(0.1, 1.0, 1.0)) {}

  static Schedule power_law(double c0, double c1, double a) {
    if (!(c0 > 0.0) || !(c1 > 0.0) || !(a > 0.0 && a <= 1.0) || !std::isfinite(c0) ||
        !std::isfinite(c1)) {
      throw DomainError("Schedule: need c0 > 0, c1 > 0, 0 < a <= 1 (got c0=" +
                        std::to_string(c0) + ", c1=" + std::to_string(c1) +
                        ", a=" + std::to_string(a) + ")");
    }
    Schedule s(PowerLaw{c0, c1, a});
    return s;
  }

  /// Power law with a = 1 chosen so that eps(0) = eps0 and b = b.
  static Schedule harmonic(double eps0, double b) {
    if (!(eps0 > 0.0) || !(b > 0.0)) throw DomainError("Schedule::harmonic: need eps0, b > 0");
    const double c0 = 1.0 / b;
    return power_law(c0, c0 / eps0, 1.0);
  }

  /// User-supplied triple, validated on the grid t = k*grid_T/(grid_points-1):
  /// eps positive and nonincreasing, eps_dot <= 0, |eps_dot| <= b eps^2 + 1e-14.
  static Schedule custom(std::function<double(double)> eps, std::function<double(double)> eps_dot,
                         double b, double grid_T = 1e4, int grid_points = 1000) {
    if (!eps || !eps_dot) throw DomainError("Schedule::custom: empty function");
    if (!(b >= 0.0)) throw DomainError("Schedule::custom: b must be nonnegative");
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_points; ++k) {
      const double t = grid_T * k / (grid_points - 1);
      const double e = eps(t);
      const double d = eps_dot(t);
      if (!(e > 0.0) || !std::isfinite(e)) {
        throw DomainError("Schedule::custom: eps not positive at t=" + std::to_string(t));
      }
      if (e > prev) throw DomainError("Schedule::custom: eps increases at t=" + std::to_string(t));
      if (!(d <= 0.0)) throw DomainError("Schedule::custom: eps_dot > 0 at t=" + std::to_string(t));
      if (std::abs(d) > b * e * e + 1e-14) {
        throw DomainError("Schedule::custom: |eps_dot| > b eps^2 at t=" + std::to_string(t));
      }
      prev = e;
    }
    Schedule s(PowerLaw{});
    s.law_.reset();
    s.eps_fn_ = std::move(eps);
    s.eps_dot_fn_ = std::move(eps_dot);
    s.b_ = b;
    return s;
  }

  /// eps(t) = eps0 for all t. Test mode only: it does not decay.
  static Schedule constant(double eps0) {
    if (!(eps0 > 0.0)) throw DomainError("Schedule::constant: eps0 must be positive");
    return custom([eps0](double) { return eps0; }, [](double) { return 0.0; }, 0.0);
  }

  double eps(double t) const {
    check_time(t);
    if (law_) return law_->c0 * std::pow(law_->c1 + t, -law_->a);
    return eps_fn_(t);
  }

  double eps_dot(double t) const {
    check_time(t);
    if (law_) return -law_->a * law_->c0 * std::pow(law_->c1 + t, -law_->a - 1.0);
    return eps_dot_fn_(t);
  }

  /// Smallest b with |eps_dot(t)| <= b eps(t)^2 for all t >= 0.
  ///
  /// For the power law |eps'|/eps^2 = (a/c0) (c1+t)^(a-1), which is
  /// nonincreasing for a <= 1, so the supremum sits at t = 0.
  double b_constant() const {
    if (law_) return (law_->a / law_->c0) * std::pow(law_->c1, law_->a - 1.0);
    return b_;
  }

  const std::optional<PowerLaw>& power_law_params() const { return law_; }

 private:
  explicit Schedule(PowerLaw p) : law_(p) {}

  static void check_time(double t) {
    if (!(t >= 0.0)) throw DomainError("Schedule: time must be nonnegative (got " + std::to_string(t) + ")");
  }

  std::optional<PowerLaw> law_;
  std::function<double(double)> eps_fn_;
  std::function<double(double)> eps_dot_fn_;
  double b_ = 0.0;
};

}  // namespace crgn
