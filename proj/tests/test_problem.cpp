#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crgn/gallery.hpp"
#include "crgn/problem.hpp"

using namespace crgn;

namespace {

/// F(x)_i = x_i^2, with analytic Jacobian.
NonlinearProblem square_problem(Index n) {
  NonlinearProblem p;
  p.label = "square";
  p.dim = n;
  p.eval = [](const Vector& x) -> Vector { return x.cwiseProduct(x); };
  p.jac = [](const Vector& x) -> Operator { return Operator((2.0 * x).asDiagonal()); };
  return p;
}

Vector ones_ramp(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * static_cast<double>(i);
  return v;
}

}  // namespace

TEST(EvalF, AffineRootAndIdentity) {
  const Vector xhat = ones_ramp(3);
  const GalleryEntry h = make_affine(3, AffineKind::hilbert_matrix, xhat);
  EXPECT_LE(eval_F(h.problem, xhat).norm(), 1e-15);
  const GalleryEntry id = make_affine(3, AffineKind::identity, xhat);
  EXPECT_TRUE(eval_F(id.problem, xhat + Vector::Unit(3, 0)).isApprox(Vector::Unit(3, 0), 1e-15));
}

TEST(EvalF, NonFiniteOutputNamesComponent) {
  NonlinearProblem p = square_problem(3);
  p.eval = [](const Vector& x) -> Vector {
    Vector y = x;
    y[1] = std::log(-1.0);
    return y;
  };
  try {
    eval_F(p, Vector::Ones(3));
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("component 1"), std::string::npos);
  }
}

TEST(EvalF, DimensionMismatchThrows) {
  EXPECT_THROW(eval_F(square_problem(3), Vector::Ones(2)), DimensionError);
}

TEST(EvalF, AutoconvolutionMatchesQuadratureOracle) {
  // Independent rendering: left-endpoint product rule on the grid s_j = j/n.
  const Index n = 12;
  const GalleryEntry e = make_autoconvolution(n);
  Vector x(n);
  for (Index j = 0; j < n; ++j) x[j] = std::cos(0.3 * static_cast<double>(j)) + 2.0;
  const double ds = 1.0 / n;
  Vector oracle(n);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0, shat = 0.0;
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) {
        if (a + b == i) {
          s += x[a] * x[b];
          shat += e.xhat[a] * e.xhat[b];
        }
      }
    }
    oracle[i] = ds * (s - shat);
  }
  EXPECT_LE((eval_F(e.problem, x) - oracle).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Jacobian, AffineIsConstantAndIdentityIsI) {
  const Vector xhat = ones_ramp(4);
  const GalleryEntry h = make_affine(4, AffineKind::hilbert_matrix, xhat);
  EXPECT_EQ(jacobian(h.problem, xhat), hilbert_matrix(4));
  EXPECT_EQ(jacobian(h.problem, xhat * 7.0), hilbert_matrix(4));
  EXPECT_EQ(jacobian(make_affine(4, AffineKind::identity, xhat).problem, Vector::Zero(4)), identity(4));
}

TEST(Jacobian, FallsBackToFiniteDifferences) {
  NonlinearProblem p = square_problem(3);
  p.jac = nullptr;
  const Vector x{{1.0, -2.0, 0.5}};
  EXPECT_LE((jacobian(p, x) - Operator((2.0 * x).asDiagonal())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FdJacobian, ExactForAffine) {
  const GalleryEntry h = make_affine(5, AffineKind::hilbert_matrix, ones_ramp(5));
  for (double step : {1e-2, 1e-4, 1e-6}) {
    EXPECT_LE((fd_jacobian(h.problem, ones_ramp(5), step) - hilbert_matrix(5)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FdJacobian, ScalarQuadratic) {
  const NonlinearProblem p = square_problem(1);
  EXPECT_NEAR(fd_jacobian(p, Vector::Constant(1, 3.0), 1e-4)(0, 0), 6.0, 1e-7);
}

TEST(FdJacobian, SecondOrderRichardsonRatio) {
  // Smooth nonlinear map with a cubic term, so the central-difference error is O(h^2).
  NonlinearProblem p;
  p.label = "cubic";
  p.dim = 2;
  p.eval = [](const Vector& x) -> Vector { return Vector{{x[0] * x[0] * x[0] + x[1], std::sin(x[0] * x[1])}}; };
  const Vector x{{0.7, 1.3}};
  Operator exact(2, 2);
  exact << 3.0 * 0.49, 1.0, 1.3 * std::cos(0.91), 0.7 * std::cos(0.91);
  const double e1 = (fd_jacobian(p, x, 1e-2) - exact).cwiseAbs().maxCoeff();
  const double e2 = (fd_jacobian(p, x, 5e-3) - exact).cwiseAbs().maxCoeff();
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}

TEST(FdJacobian, NonPositiveStepThrows) {
  EXPECT_THROW(fd_jacobian(square_problem(2), Vector::Ones(2), 0.0), DomainError);
}

TEST(EstimateBounds, AffineHasNegligibleN2) {
  const GalleryEntry h = make_affine(4, AffineKind::hilbert_matrix, ones_ramp(4));
  const BallBounds b = estimate_bounds(h.problem, h.xhat, 0.5, 16, 3);
  EXPECT_LT(b.N2, 1e-6);
  EXPECT_LE(b.N2, 0.1 * b.N1 * 1e-3);
}

TEST(EstimateBounds, IdentityInflatesToOnePointOne) {
  const GalleryEntry id = make_affine(3, AffineKind::identity, ones_ramp(3));
  const BallBounds b = estimate_bounds(id.problem, id.xhat, 1.0, 8, 1);
  EXPECT_NEAR(b.N1, 1.1, 1e-6);
  EXPECT_EQ(b.samples, 8);
  EXPECT_DOUBLE_EQ(b.inflation, 1.1);
}

TEST(EstimateBounds, DiagonalSquareHasN2NearTwoPointTwo) {
  const NonlinearProblem p = square_problem(3);
  const BallBounds b = estimate_bounds(p, Vector::Ones(3), 0.5, 16, 5);
  EXPECT_NEAR(b.N2, 2.2, 0.05 * 2.2);
}

TEST(EstimateBounds, RejectsBadRadiusAndInadmissibleSamples) {
  const NonlinearProblem p = square_problem(2);
  EXPECT_THROW(estimate_bounds(p, Vector::Ones(2), 0.0, 4, 1), DomainError);
  BoundsOptions opt;
  opt.admissible = [](const Vector& x) { return x.minCoeff() > 0.9; };
  EXPECT_THROW(estimate_bounds(p, Vector::Ones(2), 0.5, 16, 1, opt), DomainError);
}

TEST(EstimateBounds, DeterministicGivenSeed) {
  const GalleryEntry e = make_autoconvolution(6);
  const BallBounds a = estimate_bounds(e.problem, e.xhat, 0.3, 10, 42);
  const BallBounds b = estimate_bounds(e.problem, e.xhat, 0.3, 10, 42);
  EXPECT_EQ(a.N1, b.N1);
  EXPECT_EQ(a.N2, b.N2);
}

TEST(EstimateBounds, TaylorRemainderWithinN2Bound) {
  const GalleryEntry e = make_autoconvolution(6);
  const double radius = 0.4;
  const BallBounds b = estimate_bounds(e.problem, e.xhat, radius, 32, 7);
  const Operator Jhat = jacobian(e.problem, e.xhat);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    Vector d = Vector::NullaryExpr(6, [&] { return z(rng); });
    d *= radius * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / d.norm();
    const Vector rem = eval_F(e.problem, e.xhat + d) - eval_F(e.problem, e.xhat) - Jhat * d;
    EXPECT_LE(rem.norm(), 0.5 * b.N2 * d.squaredNorm() + 1e-14);
  }
}

TEST(EstimateBounds, MonotoneInRadius) {
  // The bilinear autoconvolution has N1 growing with the radius; with a fixed
  // seed the samples at radius r2 are the radius-r1 samples scaled outward.
  const GalleryEntry e = make_autoconvolution(5);
  double prev_n1 = 0.0;
  for (double r : {0.1, 0.2, 0.4, 0.8}) {
    const BallBounds b = estimate_bounds(e.problem, e.xhat, r, 16, 9);
    EXPECT_GE(b.N1, prev_n1);
    prev_n1 = b.N1;
  }
}
