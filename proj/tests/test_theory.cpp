#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crgn/gallery.hpp"
#include "crgn/theory.hpp"

using namespace crgn;

namespace {

Vector random_vec(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  return Vector::NullaryExpr(n, [&] { return z(rng); });
}

BallBounds manual_bounds(const Vector& center, double radius, double N1, double N2) {
  BallBounds b;
  b.center = center;
  b.radius = radius;
  b.N1 = N1;
  b.N2 = N2;
  b.samples = 1;
  return b;
}

}  // namespace

TEST(ComputeK, ExactInverseKillsLambda0ForIdentity) {
  const Vector xhat = Vector::Ones(3);
  const GalleryEntry id = make_affine(3, AffineKind::identity, xhat);
  const double eps0 = 0.1, N1 = 1.1, N2 = 0.2, R = 0.5, b = 0.05;
  const KResult r = compute_k(N1, N2, R, b, eps0, identity(3) / (1.0 + eps0), id.problem, xhat);
  EXPECT_LE(r.Lambda0_norm, 1e-15);
  EXPECT_NEAR(r.k, 2 * N1 * N2 * R + b + eps0 / (1.0 + eps0), 1e-12);
}

TEST(ComputeK, ZeroB0GivesUnitLambda0) {
  const GalleryEntry h = make_affine(3, AffineKind::hilbert_matrix, Vector::Ones(3));
  EXPECT_NEAR(compute_k(1, 1, 1, 0.1, 0.1, Operator::Zero(3, 3), h.problem, h.xhat).Lambda0_norm, 1.0, 1e-12);
}

TEST(ComputeK, CompliantInstanceReproducedByScalarFormula) {
  const CompliantInstance inst = compliant_instance(8, 1, CompliantKind::affine);
  const Certificate& c = inst.certificate;
  const double k = 2.0 * c.N1 * c.N2 * c.R + c.b + c.eps0 * c.B0_norm + c.Lambda0_norm;
  EXPECT_NEAR(c.k, k, 1e-12);
}

TEST(ComputeK, DimensionMismatchThrows) {
  const GalleryEntry id = make_affine(3, AffineKind::identity, Vector::Ones(3));
  EXPECT_THROW(compute_k(1, 1, 1, 0.1, 0.1, identity(2), id.problem, id.xhat), DimensionError);
}

TEST(CanonicalR, HandComputedExample) {
  EXPECT_NEAR(canonical_R(1.0, 1.0, 0.01, 0.01, 1.0, 0.01), 0.9699 / 5.03, 1e-15);
  EXPECT_NEAR(canonical_R(1.0, 1.0, 0.01, 0.01, 1.0, 0.01), 0.19283, 1e-5);
}

TEST(CanonicalR, UnsatisfiableConstantsThrow) {
  try {
    canonical_R(1.0, 1.0, 0.01, 0.01, 1.0, 1.0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("constants too large"), std::string::npos);
  }
}

TEST(CanonicalR, HalvesWhenN1N2Doubles) {
  const double r1 = canonical_R(1.3, 0.7, 0.02, 0.05, 2.0, 0.1);
  EXPECT_DOUBLE_EQ(canonical_R(2.6, 0.7, 0.02, 0.05, 2.0, 0.1), 0.5 * r1);
  EXPECT_DOUBLE_EQ(canonical_R(1.3, 1.4, 0.02, 0.05, 2.0, 0.1), 0.5 * r1);
}

TEST(CanonicalR, SaturatesRadiusInequality) {
  // At the canonical R, 1/R equals lambda = 3 N1 N2 (1 + e) / (1 - k - b eps0).
  const double N1 = 1.3, N2 = 0.7, b = 0.02, eps0 = 0.05, B0n = 2.0, L0 = 0.1;
  const double R = canonical_R(N1, N2, b, eps0, B0n, L0);
  const double k = 2 * N1 * N2 * R + b + eps0 * B0n + L0;
  const double lambda = 3 * N1 * N2 * (1 + eps0 * B0n) / (1 - k - b * eps0);
  EXPECT_NEAR(1.0 / R, lambda, 1e-12 * lambda);
}

TEST(CanonicalR, ContractionAtCanonicalRIffNumeratorPositive) {
  // With R canonical, k + b eps0 < 1 reduces to b + eps0||B0|| + ||Lambda0|| + b eps0 < 1.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int satisfiable = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double N1 = 0.1 + 3 * u(rng), N2 = 0.1 + 3 * u(rng), b = 0.5 * u(rng), eps0 = 0.5 * u(rng);
    const double B0n = 4 * u(rng), L0 = 0.6 * u(rng);
    const bool reduced = b + eps0 * B0n + L0 + b * eps0 < 1.0;
    if (!reduced) {
      EXPECT_THROW(canonical_R(N1, N2, b, eps0, B0n, L0), DomainError);
      continue;
    }
    ++satisfiable;
    const double R = canonical_R(N1, N2, b, eps0, B0n, L0);
    const double k = 2 * N1 * N2 * R + b + eps0 * B0n + L0;
    EXPECT_LT(k + b * eps0, 1.0);
  }
  EXPECT_GT(satisfiable, 200);
}

TEST(CanonicalR, ExpandedQuadraticFormIsNotAnExactReduction) {
  // b + L0 + b eps0 (1 + ||B0||) + e (e + L0 + eps0) < 1, with e = eps0 ||B0||,
  // equals the exact reduction only up to the term e eps0 (1 - b). Here the
  // exact condition holds and the expanded one does not.
  const double b = 0.1, eps0 = 0.1, B0n = 5.0, e = eps0 * B0n, L0 = 0.38;
  const double exact = b + e + L0 + b * eps0;
  const double expanded = b + L0 + b * eps0 * (1 + B0n) + e * (e + L0 + eps0);
  EXPECT_LT(exact, 1.0);
  EXPECT_GT(expanded, 1.0);
  const double R = canonical_R(1.0, 1.0, b, eps0, B0n, L0);
  EXPECT_LT(2 * R + b + e + L0 + b * eps0, 1.0);
}

TEST(SolveSource, ZeroOffsetGivesZeroW) {
  const GalleryEntry h = make_affine(4, AffineKind::hilbert_matrix, Vector::Ones(4));
  const SourceSolution s = solve_source(h.problem, h.xhat, h.xhat);
  EXPECT_EQ(s.w, Vector::Zero(4));
  EXPECT_EQ(s.residual, 0.0);
  EXPECT_TRUE(s.in_range);
}

TEST(SolveSource, RecoversConstructedSourceElement) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z;
  for (Index n = 2; n <= 8; ++n) {
    const Operator A = Operator::NullaryExpr(n, n, [&] { return z(rng); }) + 3.0 * identity(n);
    const Vector xhat = random_vec(n, rng), v = random_vec(n, rng);
    const NonlinearProblem p = detail::affine_problem("full-rank", A, xhat);
    const Vector x0 = xhat - A.transpose() * A * v;
    const SourceSolution s = solve_source(p, xhat, x0);
    EXPECT_LE((s.w - v).norm(), 1e-6 * v.norm()) << "n=" << n;
    EXPECT_TRUE(s.in_range);
  }
}

TEST(SolveSource, NullSpaceOffsetFailsRangeCheck) {
  const Vector xhat = Vector::Ones(4);
  const GalleryEntry r = make_affine(4, AffineKind::rank_deficient, xhat);
  const Vector x0 = xhat - 0.3 * Vector::Unit(4, 3);
  const SourceSolution s = solve_source(r.problem, xhat, x0);
  EXPECT_NEAR(s.residual, 0.3, 1e-14);
  EXPECT_FALSE(s.in_range);
  // Offsets with a zero last component are in the range.
  EXPECT_TRUE(solve_source(r.problem, xhat, xhat - 0.3 * Vector::Unit(4, 0)).in_range);
}

TEST(Certify, IdentityAtRootPassesWithVacuousSourceChecks) {
  const Vector xhat = Vector::Ones(3);
  const GalleryEntry id = make_affine(3, AffineKind::identity, xhat);
  const Schedule s = Schedule::harmonic(0.1, 0.05);
  const Operator B0 = identity(3) / 1.1;
  const double R = canonical_R(1.1, 0.1, s.b_constant(), 0.1, op_norm(B0), 0.0);
  const Certificate c = certify(id.problem, xhat, xhat, s, B0, manual_bounds(xhat, 10.0, 1.1, 0.1), R);
  EXPECT_EQ(c.w_norm, 0.0);
  EXPECT_TRUE(c.checks.source_size);
  EXPECT_TRUE(c.checks.initial_distance);
  EXPECT_TRUE(c.overall);
}

TEST(Certify, FarInitialPointFailsDistanceCheck) {
  const Vector xhat = Vector::Ones(3);
  const GalleryEntry id = make_affine(3, AffineKind::identity, xhat);
  const Schedule s = Schedule::harmonic(0.1, 0.05);
  const Vector x0 = xhat + Vector::Constant(3, 5.0);
  const Operator B0 = initial_inverse(id.problem, x0, 0.1, InitialInverse::exact_inverse);
  const double R = canonical_R(1.1, 0.1, s.b_constant(), 0.1, op_norm(B0), 0.0);
  const Certificate c = certify(id.problem, xhat, x0, s, B0, manual_bounds(xhat, 100.0, 1.1, 0.1), R);
  EXPECT_GE(c.lambda, c.eps0 / c.x0_distance);
  EXPECT_FALSE(c.checks.initial_distance);
  EXPECT_FALSE(c.overall);
}

TEST(Certify, SmallBoundsBallFailsCoverage) {
  const Vector xhat = Vector::Ones(3);
  const GalleryEntry id = make_affine(3, AffineKind::identity, xhat);
  const Schedule s = Schedule::harmonic(0.1, 0.05);
  const Operator B0 = identity(3) / 1.1;
  const double R = canonical_R(1.1, 0.1, s.b_constant(), 0.1, op_norm(B0), 0.0);
  const Certificate c = certify(id.problem, xhat, xhat, s, B0, manual_bounds(xhat, 0.5 * R * 0.1, 1.1, 0.1), R);
  EXPECT_FALSE(c.checks.bounds_cover_ball);
  EXPECT_FALSE(c.overall);
}

TEST(Certify, LambdaInequalitiesRecomputedIndependently) {
  for (CompliantKind kind : {CompliantKind::affine, CompliantKind::quadratic}) {
    const CompliantInstance inst = compliant_instance(4, 3, kind);
    const Certificate& c = inst.certificate;
    const double e = c.eps0 * c.B0_norm;
    const double margin = 1 - c.k - c.b * c.eps0;
    const double lambda = 3 * c.N1 * c.N2 * (1 + e) / margin;
    EXPECT_NEAR(c.lambda, lambda, 1e-12 * lambda);
    EXPECT_EQ(c.checks.source_size, lambda < margin / (2 * (c.k + 2 + e) * c.w_norm));
    EXPECT_EQ(c.checks.initial_distance, lambda < c.eps0 / c.x0_distance);
    EXPECT_EQ(c.overall, c.checks.contraction && c.checks.radius_lower && c.checks.source_size &&
                             c.checks.initial_distance && c.checks.source_range && c.checks.bounds_cover_ball);
  }
}

TEST(Certify, ReportsSamplingCaveat) {
  const CompliantInstance inst = compliant_instance(2, 1, CompliantKind::affine);
  EXPECT_EQ(inst.certificate.bound_samples, 32);
  EXPECT_DOUBLE_EQ(inst.certificate.bound_inflation, 1.1);
  ASSERT_FALSE(inst.certificate.notes.empty());
}

TEST(Riccati, ZeroSamplesPass) {
  EXPECT_TRUE(riccati_envelope_check({{0.0, 0.0}, {1.0, 0.0}}, [](double) { return 5.0; }));
}

TEST(Riccati, ScalarClosedForm) {
  std::vector<TimedValue> v;
  for (int i = 0; i <= 500; ++i) v.push_back({0.02 * i, 0.5 * std::exp(-0.02 * i)});
  EXPECT_TRUE(riccati_envelope_check(v, [](double t) { return std::exp(t / 2); }));
  EXPECT_FALSE(riccati_envelope_check(v, [](double t) { return 3.0 * std::exp(t); }));
}

TEST(Riccati, EmptySamplesThrow) {
  EXPECT_THROW(riccati_envelope_check({}, [](double) { return 1.0; }), DomainError);
}

TEST(Gronwall, ConstantCoefficientSaturates) {
  const Index n = 3;
  const double gamma = 1.3;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  const Operator V0 = Operator::NullaryExpr(n, n, [&] { return z(rng); });
  const double v = gronwall_check([&](double) -> Operator { return gamma * identity(n); },
                                  [&](double) -> Operator { return Operator::Zero(n, n); }, V0,
                                  [&](double) { return gamma; }, 3.0, 0.01);
  EXPECT_LE(std::abs(v), 1e-8);
}

TEST(Gronwall, ZeroDataIsTriviallyBounded) {
  const double v = gronwall_check([](double) -> Operator { return identity(2); },
                                  [](double) -> Operator { return Operator::Zero(2, 2); }, Operator::Zero(2, 2),
                                  [](double) { return 1.0; }, 1.0, 0.05);
  EXPECT_LE(v, 0.0);
}

TEST(Gronwall, RandomSpdPathsWithForcing) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.3, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 7;
    auto spd = [&] {
      const Operator Q = detail::random_orthogonal(n, rng);
      Vector d(n);
      for (Index i = 0; i < n; ++i) d[i] = u(rng);
      return Operator(Q * d.asDiagonal() * Q.transpose());
    };
    const Operator S0 = spd(), S1 = spd();
    const Operator G0 = Operator::NullaryExpr(n, n, [&] { return z(rng); });
    const Operator V0 = Operator::NullaryExpr(n, n, [&] { return z(rng); });
    const double T = 2.0;
    const auto A = [&](double t) -> Operator { return (1 - t / T) * S0 + (t / T) * S1; };
    const auto G = [&](double t) -> Operator { return std::cos(t) * G0; };
    const double v = gronwall_check(A, G, V0, coercivity_profile(A, T, 100), T, 0.01);
    EXPECT_LE(v, kGronwallTolerance) << "trial " << trial;
  }
}

TEST(Gronwall, NonCoerciveGammaThrowsNamingTime) {
  try {
    gronwall_check([](double) -> Operator { return identity(2); },
                   [](double) -> Operator { return Operator::Zero(2, 2); }, identity(2),
                   [](double t) { return t > 0.5 ? 2.0 : 1.0; }, 1.0, 0.1);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("t=0.6"), std::string::npos);
  }
}

TEST(Coercivity, ProfileIsLowerBoundForAffinePaths) {
  std::mt19937_64 rng(25);
  const Index n = 4;
  std::uniform_real_distribution<double> u(0.2, 3.0);
  auto spd = [&] {
    const Operator Q = detail::random_orthogonal(n, rng);
    Vector d(n);
    for (Index i = 0; i < n; ++i) d[i] = u(rng);
    return Operator(Q * d.asDiagonal() * Q.transpose());
  };
  const Operator S0 = spd(), S1 = spd();
  const auto A = [&](double t) -> Operator { return (1 - t) * S0 + t * S1; };
  const auto gamma = coercivity_profile(A, 1.0, 10);
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    EXPECT_LE(gamma(t), smallest_symmetric_eigenvalue(A(t)) + 1e-12);
  }
}

TEST(CertifyCanonical, SampledBallCoversCertifiedBall) {
  const GalleryEntry e = make_autoconvolution(4);
  const Schedule s = Schedule::harmonic(0.05, 0.02);
  const Vector x0 = e.xhat + Vector::Constant(4, 1e-4);
  const Operator B0 = initial_inverse(e.problem, x0, 0.05, InitialInverse::exact_inverse);
  const CanonicalCertificate cc = certify_canonical(e.problem, e.xhat, x0, s, B0, 16, 3);
  EXPECT_TRUE(cc.certificate.checks.contraction);
  EXPECT_TRUE(cc.certificate.checks.bounds_cover_ball);
  EXPECT_GE(cc.bounds.radius, cc.R * 0.05);
}
