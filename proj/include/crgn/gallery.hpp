#pragma once

// Test problems with known solutions, from trivially well-posed to ill-posed,
// and a search for instances that satisfy every hypothesis of the convergence
// theorem.

#include <Eigen/QR>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crgn/flow.hpp"
#include "crgn/problem.hpp"
#include "crgn/schedule.hpp"
#include "crgn/theory.hpp"

#ifndef CRGN_DATA_DIR
#define CRGN_DATA_DIR "data"
#endif

namespace crgn {

struct GalleryEntry {
  NonlinearProblem problem;
  Vector xhat;
  Vector default_x0;
  std::string notes;
};

namespace detail {

inline Vector gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Operator random_orthogonal(Index n, std::mt19937_64& rng) {
  Operator G(n, n);
  std::normal_distribution<double> normal;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) G(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Operator> qr(G);
  return qr.householderQ() * Operator::Identity(n, n);
}

inline NonlinearProblem affine_problem(std::string label, const Operator& A, const Vector& xhat) {
  NonlinearProblem p;
  p.label = std::move(label);
  p.dim = A.rows();
  p.eval = [A, xhat](const Vector& x) -> Vector { return A * (x - xhat); };
  p.jac = [A](const Vector&) -> Operator { return A; };
  p.known_solution = xhat;
  return p;
}

}  // namespace detail

/// Aij = 1 / (i + j - 1), 1-based.
inline Operator hilbert_matrix(Index n) {
  Operator H(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) H(i, j) = 1.0 / static_cast<double>(i + j + 1);
  }
  return H;
}

enum class AffineKind { identity, hilbert_matrix, rank_deficient };

/// F(x) = A (x - xhat). rank_deficient uses A = diag(1, ..., 1, 0).
inline GalleryEntry make_affine(Index n, AffineKind kind, const Vector& xhat) {
  if (n < 1) throw DomainError("make_affine: n must be positive");
  require_same_dim(n, xhat.size(), "make_affine");
  Operator A;
  std::string label;
  std::string notes;
  switch (kind) {
    case AffineKind::identity:
      A = identity(n);
      label = "identity-" + std::to_string(n);
      notes = "F(x) = x - xhat; N1 = 1, N2 = 0";
      break;
    case AffineKind::hilbert_matrix:
      A = hilbert_matrix(n);
      label = "hilbert-" + std::to_string(n);
      notes = "F(x) = H (x - xhat) with the Hilbert matrix; severely ill-conditioned";
      break;
    case AffineKind::rank_deficient:
      A = identity(n);
      A(n - 1, n - 1) = 0.0;
      label = "rank-deficient-" + std::to_string(n);
      notes = "F(x) = diag(1,...,1,0) (x - xhat); the last coordinate is unobservable";
      break;
  }
  GalleryEntry e;
  e.problem = detail::affine_problem(label, A, xhat);
  e.xhat = xhat;
  e.default_x0 = xhat + Vector::Constant(n, 0.1 / std::sqrt(static_cast<double>(n)));
  e.notes = std::move(notes);
  return e;
}

/// Discrete autoconvolution on [0, 1] with step ds = 1/n:
/// F(x)_i = ds * sum_{j <= i} x_j x_{i-j+1} - y_i, with y generated from
/// xhat(s) = 1 + s at the grid points s_j = j/n. F is bilinear, so F'' is
/// constant in x.
inline GalleryEntry make_autoconvolution(Index n) {
  if (n < 2) throw DomainError("make_autoconvolution: n must be at least 2");
  const double ds = 1.0 / static_cast<double>(n);
  Vector xhat(n);
  for (Index j = 0; j < n; ++j) xhat[j] = 1.0 + static_cast<double>(j + 1) * ds;

  auto conv = [n, ds](const Vector& x) {
    Vector c = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index j = 0; j <= i; ++j) acc += x[j] * x[i - j];
      c[i] = ds * acc;
    }
    return c;
  };
  const Vector y = conv(xhat);

  GalleryEntry e;
  e.problem.label = "autoconvolution-" + std::to_string(n);
  e.problem.dim = n;
  e.problem.eval = [conv, y](const Vector& x) -> Vector { return conv(x) - y; };
  e.problem.jac = [n, ds](const Vector& x) -> Operator {
    Operator J = Operator::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k <= i; ++k) J(i, k) = 2.0 * ds * x[i - k];
    }
    return J;
  };
  e.problem.known_solution = xhat;
  e.xhat = xhat;
  e.default_x0 = xhat + Vector::Constant(n, 0.05);
  e.notes = "autoconvolution of xhat(s) = 1 + s; nonlinear, ill-conditioned lower-triangular Jacobian";
  return e;
}

inline std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CRGN_DATA_DIR"); env && *env) return env;
  return CRGN_DATA_DIR;
}

inline Vector read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open reference data " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    values.push_back(std::stod(line));
  }
  Vector v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Index>(i)] = values[i];
  return v;
}

/// Collocation analogue of a renormalization fixed-point equation of
/// Feigenbaum type. Unknowns are the coefficients c_0..c_{n-1} of the even
/// polynomial g(s) = sum_k c_k s^(2k); with lam = -g(1) the residuals are
///
///   F_0 = c_0 - 1                                     (normalization g(0) = 1)
///   F_i = g(s_i) + g(g(lam s_i)) / lam,  i = 1..n-1   (Chebyshev points of [0,1])
///
/// The reference root is read from feigenbaum_like_n<n>.txt, produced by an
/// independent high-precision Newton bootstrap (tools/bootstrap_feigenbaum.py).
inline GalleryEntry make_feigenbaum_like(Index n, const std::filesystem::path& data_dir = default_data_dir()) {
  if (n < 4) throw DomainError("make_feigenbaum_like: n must be at least 4");
  const Vector xhat = read_vector_file(data_dir / ("feigenbaum_like_n" + std::to_string(n) + ".txt"));
  if (xhat.size() != n) throw DimensionError("make_feigenbaum_like: reference data has wrong length");

  const Index m = n - 1;
  Vector nodes(m);
  for (Index i = 0; i < m; ++i) {
    nodes[i] = 0.5 * (1.0 + std::cos((2.0 * static_cast<double>(i + 1) - 1.0) * M_PI /
                                     (2.0 * static_cast<double>(m))));
  }

  // g(s) and g'(s) by Horner in s^2.
  auto g = [](const Vector& c, double s) {
    const double s2 = s * s;
    double acc = 0.0;
    for (Index k = c.size() - 1; k >= 0; --k) acc = acc * s2 + c[k];
    return acc;
  };
  auto dg = [](const Vector& c, double s) {
    const double s2 = s * s;
    double acc = 0.0;
    for (Index k = c.size() - 1; k >= 1; --k) acc = acc * s2 + 2.0 * static_cast<double>(k) * c[k];
    return acc * s;
  };

  GalleryEntry e;
  e.problem.label = "feigenbaum-" + std::to_string(n);
  e.problem.dim = n;
  e.problem.eval = [g, nodes, n](const Vector& c) -> Vector {
    Vector r(n);
    const double lam = -g(c, 1.0);
    r[0] = c[0] - 1.0;
    for (Index i = 0; i < nodes.size(); ++i) {
      const double s = nodes[i];
      r[i + 1] = g(c, s) + g(c, g(c, lam * s)) / lam;
    }
    return r;
  };
  e.problem.jac = [g, dg, nodes, n](const Vector& c) -> Operator {
    Operator J = Operator::Zero(n, n);
    J(0, 0) = 1.0;
    const double lam = -g(c, 1.0);
    for (Index i = 0; i < nodes.size(); ++i) {
      const double s = nodes[i];
      const double u = lam * s;
      const double v = g(c, u);
      const double w = g(c, v);
      for (Index k = 0; k < n; ++k) {
        const double dv = std::pow(u, 2.0 * static_cast<double>(k)) - dg(c, u) * s;
        const double dw = std::pow(v, 2.0 * static_cast<double>(k)) + dg(c, v) * dv;
        J(i + 1, k) = std::pow(s, 2.0 * static_cast<double>(k)) + dw / lam + w / (lam * lam);
      }
    }
    return J;
  };
  e.problem.known_solution = xhat;
  e.xhat = xhat;
  e.default_x0 = xhat;
  e.default_x0[1] = -1.5;
  for (Index k = 2; k < n; ++k) e.default_x0[k] = 0.0;
  e.default_x0[2] = 0.1;
  e.notes = "approximate analogue of a Feigenbaum-type functional equation, even-polynomial collocation; "
            "not a reproduction of any published discretization";
  return e;
}

/// F(x) - delta * eta with a fixed unit vector eta: a noisy data term. The
/// perturbed problem no longer vanishes at xhat, so known_solution is dropped.
inline NonlinearProblem with_data_noise(const NonlinearProblem& p, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw DomainError("with_data_noise: delta must be nonnegative");
  if (delta == 0.0) return p;
  std::mt19937_64 rng(seed ^ 0x6e6f697365ULL);
  Vector eta = detail::gaussian_vector(p.dim, rng);
  eta.normalize();
  NonlinearProblem q = p;
  q.label = p.label + "+noise";
  q.eval = [f = p.eval, shift = Vector(delta * eta)](const Vector& x) -> Vector { return f(x) - shift; };
  q.known_solution.reset();
  return q;
}

// ---------------------------------------------------------------------------
// Compliant instances
// ---------------------------------------------------------------------------

enum class CompliantKind {
  identity,
  /// A = U diag(s) V^T, singular values spread over [1, 2]
  affine,
  hilbert_matrix,
  rank_deficient,
  /// affine part as `affine` plus (c/2) (x - xhat)^2 componentwise, c = 0.5
  quadratic,
};

inline std::string_view to_string(CompliantKind k) {
  switch (k) {
    case CompliantKind::identity: return "identity";
    case CompliantKind::affine: return "affine";
    case CompliantKind::hilbert_matrix: return "hilbert";
    case CompliantKind::rank_deficient: return "rank-deficient";
    case CompliantKind::quadratic: return "quadratic";
  }
  return "unknown";
}

struct CompliantInstance {
  GalleryEntry entry;
  Schedule schedule;
  Operator B0;
  double R = 0.0;
  BallBounds bounds;
  Certificate certificate;
  int halvings = 0;
};

struct CompliantOptions {
  double initial_eps0 = 0.1;
  double b = 0.05;
  double initial_w_norm = 1.0;
  int max_halvings = 60;
  int bound_samples = 32;
  /// N2 floor relative to N1. Any N2 >= ||F''|| is a valid bound; a positive
  /// floor keeps R finite for affine F.
  double curvature_floor = 1e-6;
  double quadratic_curvature = 0.5;
};

namespace detail {

inline GalleryEntry compliant_entry(Index n, CompliantKind kind, std::mt19937_64& rng, double curvature) {
  const Vector xhat = gaussian_vector(n, rng);
  std::string label = "compliant-" + std::string(to_string(kind)) + "-" + std::to_string(n);
  Operator A;
  switch (kind) {
    case CompliantKind::identity:
      A = identity(n);
      break;
    case CompliantKind::hilbert_matrix:
      A = hilbert_matrix(n);
      break;
    case CompliantKind::rank_deficient:
      A = identity(n);
      A(n - 1, n - 1) = 0.0;
      break;
    case CompliantKind::affine:
    case CompliantKind::quadratic: {
      const Operator U = random_orthogonal(n, rng);
      const Operator V = random_orthogonal(n, rng);
      Vector s(n);
      for (Index i = 0; i < n; ++i) s[i] = n == 1 ? 1.5 : 1.0 + static_cast<double>(i) / static_cast<double>(n - 1);
      A = U * s.asDiagonal() * V.transpose();
      break;
    }
  }
  GalleryEntry e;
  e.xhat = xhat;
  e.default_x0 = xhat;
  if (kind != CompliantKind::quadratic) {
    e.problem = affine_problem(label, A, xhat);
    e.notes = "affine instance searched for certificate compliance";
    return e;
  }
  const double c = curvature;
  e.problem.label = label;
  e.problem.dim = n;
  e.problem.eval = [A, xhat, c](const Vector& x) -> Vector {
    const Vector d = x - xhat;
    return A * d + 0.5 * c * d.cwiseProduct(d);
  };
  e.problem.jac = [A, xhat, c](const Vector& x) -> Operator {
    Operator J = A;
    J.diagonal() += c * (x - xhat);
    return J;
  };
  e.problem.known_solution = xhat;
  e.notes = "mildly nonlinear instance (componentwise quadratic term), searched for certificate compliance";
  return e;
}

}  // namespace detail

/// Searches for an instance satisfying every hypothesis of the convergence
/// theorem. The offset xhat - x0 = F'(xhat)* F'(xhat) w is built from a seeded
/// direction (plus a null-space component for rank_deficient, which therefore
/// never complies). Each failed attempt halves one quantity: eps(0) when the
/// contraction condition k + b eps(0) < 1 fails and eps(0)||B0|| outweighs
/// ||Lambda(0)||, ||w|| otherwise. Halving both together would leave
/// ||x0 - xhat|| / (R eps(0)) unchanged.
/// The schedule is the harmonic law with fixed b.
inline CompliantInstance compliant_instance(Index n, std::uint64_t seed,
                                            CompliantKind kind = CompliantKind::affine,
                                            const CompliantOptions& opt = {}) {
  if (n < 1 || n > 16) throw DomainError("compliant_instance: need 1 <= n <= 16");
  std::mt19937_64 rng(seed);
  CompliantInstance inst;
  inst.entry = detail::compliant_entry(n, kind, rng, opt.quadratic_curvature);
  const NonlinearProblem& p = inst.entry.problem;
  const Vector& xhat = inst.entry.xhat;

  Vector direction = detail::gaussian_vector(n, rng);
  direction.normalize();
  const Operator Jhat = jacobian(p, xhat);
  const Operator gram = Jhat.transpose() * Jhat;
  Vector offset_dir = gram * direction;
  if (kind == CompliantKind::rank_deficient) offset_dir += offset_dir.norm() * Vector::Unit(n, n - 1);

  double eps0 = opt.initial_eps0;
  double w_scale = opt.initial_w_norm;
  for (int halving = 0; halving <= opt.max_halvings; ++halving) {
    const Schedule schedule = Schedule::harmonic(eps0, opt.b);
    const Vector x0 = xhat - w_scale * offset_dir;
    // Which quantity to halve on failure. ||Lambda0|| shrinks as x0 -> xhat;
    // eps0 ||B0|| shrinks with eps0.
    bool shrink_eps = false;
    try {
      Operator B0 = initial_inverse(p, x0, eps0, InitialInverse::exact_inverse);
      const double B0_norm = op_norm(B0);
      const double Lambda0 = compute_k(0.0, 0.0, 0.0, 0.0, eps0, B0, p, xhat).Lambda0_norm;
      shrink_eps = eps0 * B0_norm > Lambda0;

      CanonicalCertificate cc =
          certify_canonical(p, xhat, x0, schedule, B0, opt.bound_samples, seed + 17, opt.curvature_floor);
      Certificate& cert = cc.certificate;
      if (cert.overall) {
        inst.entry.default_x0 = x0;
        inst.schedule = schedule;
        inst.B0 = std::move(B0);
        inst.R = cc.R;
        inst.bounds = std::move(cc.bounds);
        inst.certificate = std::move(cert);
        inst.halvings = halving;
        return inst;
      }
      if (cert.checks.contraction) shrink_eps = false;
    } catch (const Error&) {
      // Factorization failure, unreachable contraction, or an op_norm that
      // did not settle. shrink_eps keeps whatever was decided before the throw.
    }
    if (shrink_eps) {
      eps0 *= 0.5;
    } else {
      w_scale *= 0.5;
    }
  }
  throw Error("compliant_instance: no compliant configuration at this dimension/seed (" +
              std::string(to_string(kind)) + ", n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")");
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

struct ParsedLabel {
  std::string family;
  Index n = 0;
};

/// "family-N" -> {family, N}.
inline ParsedLabel parse_label(std::string_view label) {
  const auto dash = label.rfind('-');
  if (dash == std::string_view::npos || dash + 1 >= label.size()) {
    throw DomainError("unknown problem label '" + std::string(label) + "'");
  }
  long n = 0;
  const std::string_view digits = label.substr(dash + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || n < 1) {
    throw DomainError("unknown problem label '" + std::string(label) + "'");
  }
  return {std::string(label.substr(0, dash)), static_cast<Index>(n)};
}

inline bool is_compliant_label(std::string_view label) { return label.starts_with("compliant-"); }

inline CompliantKind compliant_kind(std::string_view family) {
  if (family == "compliant-identity") return CompliantKind::identity;
  if (family == "compliant-affine") return CompliantKind::affine;
  if (family == "compliant-hilbert") return CompliantKind::hilbert_matrix;
  if (family == "compliant-rank-deficient") return CompliantKind::rank_deficient;
  if (family == "compliant-quadratic") return CompliantKind::quadratic;
  throw DomainError("unknown problem family '" + std::string(family) + "'");
}

/// xhat_i = 1 + i/n, used by the affine label families.
inline Vector ramp(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + static_cast<double>(i) / static_cast<double>(n);
  return v;
}

/// Known labels: identity-N, hilbert-N, rank-deficient-N, autoconvolution-N,
/// feigenbaum-N, compliant-{identity,affine,hilbert,rank-deficient,quadratic}-N.
inline GalleryEntry make_entry(std::string_view label, std::uint64_t seed = 1,
                               const std::filesystem::path& data_dir = default_data_dir()) {
  const ParsedLabel pl = parse_label(label);
  if (pl.family == "identity") return make_affine(pl.n, AffineKind::identity, ramp(pl.n));
  if (pl.family == "hilbert") return make_affine(pl.n, AffineKind::hilbert_matrix, ramp(pl.n));
  if (pl.family == "rank-deficient") return make_affine(pl.n, AffineKind::rank_deficient, ramp(pl.n));
  if (pl.family == "autoconvolution") return make_autoconvolution(pl.n);
  if (pl.family == "feigenbaum") return make_feigenbaum_like(pl.n, data_dir);
  if (is_compliant_label(label)) return compliant_instance(pl.n, seed, compliant_kind(pl.family)).entry;
  throw DomainError("unknown problem label '" + std::string(label) + "'");
}

inline std::vector<std::string> gallery_families() {
  return {"identity",          "hilbert",          "rank-deficient",    "autoconvolution",
          "feigenbaum",        "compliant-identity", "compliant-affine", "compliant-hilbert",
          "compliant-rank-deficient", "compliant-quadratic"};
}

}  // namespace crgn
