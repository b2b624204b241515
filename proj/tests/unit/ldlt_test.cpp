#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "pairflow/error.hpp"
#include "pairflow/ldlt.hpp"

namespace pairflow {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Inertia eigen_inertia(const MatrixXd& a, double tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  Inertia out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double e = es.eigenvalues()(i);
    if (std::abs(e) <= tol) ++out.zero;
    else if (e > 0) ++out.positive;
    else ++out.negative;
  }
  return out;
}

MatrixXd random_symmetric_dense(Eigen::Index n, testing::Rng& rng) {
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = testing::uniform(rng, -1.0, 1.0);
  }
  return a;
}

TEST(Ldlt, SolvesRandomIndefiniteSystems) {
  testing::Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + t % 25);
    const MatrixXd a = random_symmetric_dense(n, rng);
    const VectorXd b = VectorXd::Random(n);
    const SymmetricIndefiniteLdlt f(a);
    ASSERT_FALSE(f.singular());
    const VectorXd x = f.solve(b);
    const VectorXd ref = a.fullPivLu().solve(b);
    EXPECT_LE((a * x - b).norm() / b.norm(), 1e-10);
    EXPECT_LE((x - ref).norm() / std::max(1.0, ref.norm()), 1e-8);
    EXPECT_EQ(f.inertia(), eigen_inertia(a, 0.0));
  }
}

TEST(Ldlt, SaddlePointInertia) {
  testing::Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 6, m = 3;
    MatrixXd h = random_symmetric_dense(n, rng);
    h = h * h.transpose() + MatrixXd::Identity(n, n);
    const MatrixXd b = MatrixXd::Random(m, n);
    MatrixXd k = MatrixXd::Zero(n + m, n + m);
    k.topLeftCorner(n, n) = h;
    k.topRightCorner(n, m) = b.transpose();
    k.bottomLeftCorner(m, n) = b;
    const SymmetricIndefiniteLdlt f(k);
    EXPECT_EQ(f.inertia(), (Inertia{static_cast<int>(n), static_cast<int>(m), 0}));
  }
}

TEST(Ldlt, ZeroDiagonalNeedsTwoByTwoPivot) {
  MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  const SymmetricIndefiniteLdlt f(a);
  EXPECT_EQ(f.inertia(), (Inertia{1, 1, 0}));
  VectorXd b(2);
  b << 3, 5;
  const VectorXd x = f.solve(b);
  EXPECT_NEAR(x(0), 5.0, 1e-14);
  EXPECT_NEAR(x(1), 3.0, 1e-14);
}

TEST(Ldlt, DetectsSingular) {
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 0) = 1;
  a(1, 2) = a(2, 1) = 1;
  EXPECT_FALSE(SymmetricIndefiniteLdlt(a).singular());
  a(1, 2) = a(2, 1) = 0;
  const SymmetricIndefiniteLdlt f(a);
  EXPECT_TRUE(f.singular());
  EXPECT_EQ(f.inertia().zero, 2);

  VectorXd v(3);
  v << 1, 2, -1;
  EXPECT_TRUE(SymmetricIndefiniteLdlt(v * v.transpose()).singular());
}

TEST(Ldlt, ReadsLowerTriangleOnly) {
  testing::Rng rng(1);
  const MatrixXd a = random_symmetric_dense(5, rng);
  MatrixXd junk = a;
  junk.triangularView<Eigen::StrictlyUpper>().setConstant(1e6);
  const VectorXd b = VectorXd::Ones(5);
  EXPECT_LE((SymmetricIndefiniteLdlt(junk).solve(b) - SymmetricIndefiniteLdlt(a).solve(b)).norm(), 1e-12);
}

TEST(Ldlt, RejectsNonSquare) {
  EXPECT_THROW(SymmetricIndefiniteLdlt(MatrixXd::Zero(2, 3)), DimensionMismatch);
}

}  // namespace
}  // namespace pairflow
