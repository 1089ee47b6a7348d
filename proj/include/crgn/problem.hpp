#pragma once

// Nonlinear operators F: H -> H, their Frechet derivatives and sampled bounds
// N1 >= ||F'(x)||, N2 >= ||F''(x)|| over a ball.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crgn/hilbert.hpp"

namespace crgn {

struct NonlinearProblem {
  std::string label;
  Index dim = 0;
  std::function<Vector(const Vector&)> eval;
  /// Optional; finite differences are used when empty.
  std::function<Operator(const Vector&)> jac;
  /// x-hat with F(x-hat) = 0, when known.
  std::optional<Vector> known_solution;
};

inline constexpr double kDefaultFdStep = 1e-6;

inline Vector eval_F(const NonlinearProblem& p, const Vector& x) {
  require_same_dim(p.dim, x.size(), "eval_F");
  require_finite(x, "eval_F input");
  Vector y = p.eval(x);
  require_same_dim(p.dim, y.size(), "eval_F output");
  require_finite(y, ("F(x) of " + p.label).c_str());
  return y;
}

/// Central differences, column j = (F(x + h e_j) - F(x - h e_j)) / (2h).
inline Operator fd_jacobian(const NonlinearProblem& p, const Vector& x, double h) {
  if (!(h > 0.0)) throw DomainError("fd_jacobian: step must be positive");
  require_same_dim(p.dim, x.size(), "fd_jacobian");
  Operator J(p.dim, p.dim);
  Vector xp = x;
  Vector xm = x;
  for (Index j = 0; j < p.dim; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (eval_F(p, xp) - eval_F(p, xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

inline Operator jacobian(const NonlinearProblem& p, const Vector& x) {
  require_same_dim(p.dim, x.size(), "jacobian");
  if (!p.jac) return fd_jacobian(p, x, kDefaultFdStep);
  Operator J = p.jac(x);
  if (J.rows() != p.dim || J.cols() != p.dim) {
    throw DimensionError("jacobian of " + p.label + ": wrong shape");
  }
  require_finite(J, ("F'(x) of " + p.label).c_str());
  return J;
}

struct BallBounds {
  Vector center;
  double radius = 0.0;
  double N1 = 0.0;
  double N2 = 0.0;
  int samples = 0;
  double inflation = 1.0;
};

struct BoundsOptions {
  double inflation = 1.1;
  /// Random unit directions per point for N2, on top of the coordinate axes.
  int random_directions = 16;
  /// delta = relative_step * radius for the derivative difference quotient.
  double relative_step = 1e-4;
  /// Optional admissibility predicate; sampling outside it is an error.
  std::function<bool(const Vector&)> admissible;
};

/// Sampled estimates of N1 and N2 on the closed ball B(center, radius).
///
/// The sample set is the center plus `samples` points drawn uniformly from the
/// ball. N2 uses the difference quotient (F'(x + delta d) - F'(x)) / delta over
/// unit directions d; only its operator norm enters the convergence theory, so
/// the bilinear F'' is never assembled. Both maxima are multiplied by the
/// inflation factor. Deterministic given the seed.
inline BallBounds estimate_bounds(const NonlinearProblem& p, const Vector& center, double radius,
                                  int samples, std::uint64_t seed,
                                  const BoundsOptions& opt = {}) {
  if (!(radius > 0.0)) throw DomainError("estimate_bounds: radius must be positive");
  if (samples < 1) throw DomainError("estimate_bounds: need at least one sample");
  require_same_dim(p.dim, center.size(), "estimate_bounds");
  const Index n = p.dim;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto unit = [&] {
    Vector d(n);
    for (Index i = 0; i < n; ++i) d[i] = normal(rng);
    return Vector(d / d.norm());
  };

  std::vector<Vector> points{center};
  points.reserve(static_cast<std::size_t>(samples) + 1);
  for (int s = 0; s < samples; ++s) {
    const Vector d = unit();
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(n));
    points.emplace_back(center + r * d);
  }
  std::vector<Vector> directions;
  for (Index j = 0; j < n; ++j) directions.emplace_back(Vector::Unit(n, j));
  for (int k = 0; k < opt.random_directions; ++k) directions.push_back(unit());

  const double delta = opt.relative_step * radius;
  double n1 = 0.0;
  double n2 = 0.0;
  for (const Vector& x : points) {
    if (opt.admissible && !opt.admissible(x)) {
      throw DomainError("estimate_bounds: sample point outside the admissible region of " + p.label);
    }
    const Operator J = jacobian(p, x);
    n1 = std::max(n1, op_norm(J));
    for (const Vector& d : directions) {
      const Operator dJ = (jacobian(p, x + delta * d) - J) / delta;
      n2 = std::max(n2, op_norm(dJ));
    }
  }
  return BallBounds{center, radius, opt.inflation * n1, opt.inflation * n2, samples, opt.inflation};
}

}  // namespace crgn
