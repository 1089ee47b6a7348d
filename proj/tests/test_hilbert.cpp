#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "crgn/hilbert.hpp"

using namespace crgn;

namespace {

Operator random_op(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  return Operator::NullaryExpr(n, n, [&] { return z(rng); });
}

Vector random_vec(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  return Vector::NullaryExpr(n, [&] { return z(rng); });
}

}  // namespace

TEST(Inner, OrthogonalBasisVectors) { EXPECT_EQ(inner(Vector::Unit(2, 0), Vector::Unit(2, 1)), 0.0); }

TEST(Inner, NormSquared) {
  const Vector u{{2.0, 3.0}};
  EXPECT_DOUBLE_EQ(inner(u, u), 13.0);
}

TEST(Inner, SymmetricOverRandomPairs) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector u = random_vec(7, rng), v = random_vec(7, rng);
    EXPECT_NEAR(inner(u, v), inner(v, u), 1e-15 * (1.0 + std::abs(inner(u, v))));
  }
}

TEST(Inner, DimensionMismatchThrows) { EXPECT_THROW(inner(Vector::Zero(2), Vector::Zero(3)), DimensionError); }

TEST(Apply, IdentityZeroAndBasisColumn) {
  std::mt19937_64 rng(2);
  const Vector v = random_vec(4, rng);
  EXPECT_EQ(apply(identity(4), v), v);
  EXPECT_EQ(apply(Operator::Zero(4, 4), v), Vector::Zero(4));
  const Operator A = random_op(4, rng);
  for (Index j = 0; j < 4; ++j) EXPECT_EQ(apply(A, Vector::Unit(4, j)), A.col(j));
}

TEST(Apply, DimensionMismatchThrows) { EXPECT_THROW(apply(identity(3), Vector::Zero(2)), DimensionError); }

TEST(Adjoint, SymmetricIsSelfAdjointAndInvolution) {
  std::mt19937_64 rng(3);
  const Operator M = random_op(5, rng);
  const Operator S = M + M.transpose();
  EXPECT_EQ(adjoint(S), S);
  EXPECT_EQ(adjoint(adjoint(M)), M);
}

TEST(Adjoint, AdjointIdentityOnRandomTrials) {
  std::mt19937_64 rng(4);
  for (Index n : {2, 5, 10}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Operator A = random_op(n, rng);
      const Vector u = random_vec(n, rng), v = random_vec(n, rng);
      const double lhs = inner(apply(A, u), v);
      const double rhs = inner(u, apply(adjoint(A), v));
      const Eigen::JacobiSVD<Operator> svd(A);
      EXPECT_LE(std::abs(lhs - rhs), 1e-12 * (1.0 + svd.singularValues()[0] * u.norm() * v.norm()));
    }
  }
}

TEST(SolveRegularized, ZeroOperatorUnitEps) {
  const Vector rhs{{1.0, -2.0, 3.0}};
  EXPECT_TRUE(solve_regularized(Operator::Zero(3, 3), 1.0, rhs).isApprox(rhs, 1e-15));
}

TEST(SolveRegularized, IdentityUnitEpsHalves) {
  const Vector rhs{{1.0, -2.0, 3.0}};
  EXPECT_TRUE(solve_regularized(identity(3), 1.0, rhs).isApprox(rhs / 2.0, 1e-15));
}

TEST(SolveRegularized, MatchesExplicitInverseOracle) {
  std::mt19937_64 rng(5);
  for (Index n = 1; n <= 10; ++n) {
    const Operator J = random_op(n, rng);
    const Vector rhs = random_vec(n, rng);
    const Operator M = J.transpose() * J + 0.1 * identity(n);
    const Vector oracle = M.inverse() * rhs;  // Eigen's LU-based dense inverse
    const Vector y = solve_regularized(J.transpose() * J, 0.1, rhs);
    EXPECT_LE((y - oracle).norm(), 1e-9 * oracle.norm()) << "n=" << n;
    EXPECT_LE((M * y - rhs).norm(), 1e-10 * rhs.norm()) << "n=" << n;
  }
}

TEST(SolveRegularized, NonPositiveEpsThrows) {
  EXPECT_THROW(solve_regularized(identity(2), 0.0, Vector::Ones(2)), DomainError);
  EXPECT_THROW(solve_regularized(identity(2), -1.0, Vector::Ones(2)), DomainError);
}

TEST(SolveRegularized, IndefiniteReportsSmallestPivot) {
  Operator A = identity(3);
  A(1, 1) = -2.0;
  try {
    solve_regularized(A, 0.5, Vector::Ones(3));
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_DOUBLE_EQ(e.smallest_pivot(), -1.5);
    EXPECT_NE(std::string(e.what()).find("pivot"), std::string::npos);
  }
}

TEST(RegularizedInverse, InvertsShiftedOperator) {
  std::mt19937_64 rng(6);
  const Operator J = random_op(6, rng);
  const Operator Binv = regularized_inverse(J.transpose() * J, 0.3);
  const Operator M = J.transpose() * J + 0.3 * identity(6);
  EXPECT_LE((M * Binv - identity(6)).norm(), 1e-10);
}

TEST(OpNorm, IdentityAndDiagonal) {
  EXPECT_NEAR(op_norm(identity(5)), 1.0, 1e-12);
  Operator D = Operator::Zero(2, 2);
  D(0, 0) = 3.0;
  D(1, 1) = 1.0;
  EXPECT_NEAR(op_norm(D), 3.0, 3e-6);
  EXPECT_EQ(op_norm(Operator::Zero(3, 3)), 0.0);
}

TEST(OpNorm, MatchesEigenvalueOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Operator A = random_op(8, rng);
    const Operator AtA = A.transpose() * A;
    const double oracle =
        std::sqrt(Eigen::SelfAdjointEigenSolver<Operator>(AtA, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
    EXPECT_NEAR(op_norm(A), oracle, 1e-5 * oracle);
  }
}

TEST(OpNorm, DeterministicForFixedSeed) {
  std::mt19937_64 rng(8);
  const Operator A = random_op(6, rng);
  EXPECT_EQ(op_norm(A), op_norm(A));
}

TEST(OpNorm, SubmultiplicativeWithinTolerance) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Operator A = random_op(6, rng), B = random_op(6, rng);
    EXPECT_LE(op_norm(A * B), 1.001 * op_norm(A) * op_norm(B));
  }
}

TEST(OpNorm, ReportsBestEstimateOnNonConvergence) {
  std::mt19937_64 rng(10);
  const Operator A = random_op(6, rng);
  PowerIterationOptions opt;
  opt.max_iterations = 1;
  opt.tolerance = 1e-15;
  try {
    op_norm(A, opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_estimate(), 0.0);
  }
}

TEST(RequireFinite, NamesOffendingComponent) {
  Vector v = Vector::Zero(3);
  v[2] = std::nan("");
  try {
    require_finite(v, "x");
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}
