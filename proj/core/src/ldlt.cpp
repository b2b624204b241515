#include "pairflow/ldlt.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "pairflow/error.hpp"

namespace pairflow {

namespace {

constexpr double kBunchKaufmanAlpha = 0.6403882032022076;  // (1 + sqrt(17)) / 8

void count_eigen_sign(double lambda, double tol, Inertia& inertia) {
  if (std::abs(lambda) <= tol) {
    ++inertia.zero;
  } else if (lambda > 0.0) {
    ++inertia.positive;
  } else {
    ++inertia.negative;
  }
}

}  // namespace

void SymmetricIndefiniteLdlt::compute(const Eigen::MatrixXd& input, double zero_pivot_tol) {
  if (input.rows() != input.cols()) {
    throw DimensionMismatch("SymmetricIndefiniteLdlt: matrix is not square");
  }
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = input.triangularView<Eigen::Lower>();
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose().triangularView<Eigen::StrictlyUpper>();

  l_ = Eigen::MatrixXd::Identity(n, n);
  d_diag_ = Eigen::VectorXd::Zero(n);
  d_sub_ = Eigen::VectorXd::Zero(n);
  block_size_.assign(static_cast<std::size_t>(n), 0);
  perm_.resize(static_cast<std::size_t>(n));
  std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
  inertia_ = {};

  const double anorm = n > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
  const double tol = zero_pivot_tol * std::max(anorm, 1e-300);

  // Symmetric interchange of indices p and q in the active part, carrying the
  // already computed columns of L along.
  auto swap_sym = [&](Eigen::Index p, Eigen::Index q, Eigen::Index k) {
    if (p == q) return;
    a.row(p).swap(a.row(q));
    a.col(p).swap(a.col(q));
    if (k > 0) l_.block(p, 0, 1, k).swap(l_.block(q, 0, 1, k));
    std::swap(perm_[static_cast<std::size_t>(p)], perm_[static_cast<std::size_t>(q)]);
  };

  Eigen::Index k = 0;
  while (k < n) {
    const double absakk = std::abs(a(k, k));
    Eigen::Index r = k;
    double colmax = 0.0;
    if (k + 1 < n) {
      colmax = a.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&r);
      r += k + 1;
    }

    int step = 1;
    Eigen::Index kp = k;
    if (std::max(absakk, colmax) <= tol) {
      // Column is numerically zero: record a zero pivot and move on.
      block_size_[static_cast<std::size_t>(k)] = 1;
      d_diag_(k) = a(k, k);
      ++inertia_.zero;
      if (k + 1 < n) l_.col(k).tail(n - k - 1).setZero();
      ++k;
      continue;
    }
    if (absakk < kBunchKaufmanAlpha * colmax) {
      double rowmax = 0.0;
      for (Eigen::Index j = k; j < n; ++j) {
        if (j != r) rowmax = std::max(rowmax, std::abs(a(r, j)));
      }
      if (absakk * rowmax >= kBunchKaufmanAlpha * colmax * colmax) {
        kp = k;
      } else if (std::abs(a(r, r)) >= kBunchKaufmanAlpha * rowmax) {
        kp = r;
      } else {
        kp = r;
        step = 2;
      }
    }

    if (step == 1) {
      swap_sym(k, kp, k);
      const double d = a(k, k);
      d_diag_(k) = d;
      block_size_[static_cast<std::size_t>(k)] = 1;
      count_eigen_sign(d, tol, inertia_);
      const Eigen::Index m = n - k - 1;
      if (m > 0) {
        if (std::abs(d) <= tol) {
          l_.col(k).tail(m).setZero();
        } else {
          const Eigen::VectorXd col = a.col(k).tail(m);
          l_.col(k).tail(m) = col / d;
          a.bottomRightCorner(m, m).noalias() -= col * col.transpose() / d;
        }
      }
    } else {
      swap_sym(k + 1, kp, k);
      const double d11 = a(k, k);
      const double d21 = a(k + 1, k);
      const double d22 = a(k + 1, k + 1);
      d_diag_(k) = d11;
      d_diag_(k + 1) = d22;
      d_sub_(k) = d21;
      block_size_[static_cast<std::size_t>(k)] = 2;

      const double half_tr = 0.5 * (d11 + d22);
      const double rad = std::hypot(0.5 * (d11 - d22), d21);
      count_eigen_sign(half_tr + rad, tol, inertia_);
      count_eigen_sign(half_tr - rad, tol, inertia_);

      const Eigen::Index m = n - k - 2;
      if (m > 0) {
        const double det = d11 * d22 - d21 * d21;
        Eigen::Matrix2d dinv;
        dinv << d22 / det, -d21 / det, -d21 / det, d11 / det;
        const Eigen::MatrixXd c = a.block(k + 2, k, m, 2);
        const Eigen::MatrixXd lblock = c * dinv;
        l_.block(k + 2, k, m, 2) = lblock;
        a.bottomRightCorner(m, m).noalias() -= lblock * c.transpose();
      }
    }
    k += step;
  }
}

Eigen::VectorXd SymmetricIndefiniteLdlt::solve(const Eigen::VectorXd& b) const {
  const Eigen::Index n = l_.rows();
  if (b.size() != n) throw DimensionMismatch("SymmetricIndefiniteLdlt::solve: size mismatch");
  if (singular()) throw DegenerateSystem("SymmetricIndefiniteLdlt::solve: singular matrix", 0.0);

  Eigen::VectorXd y(n);
  for (Eigen::Index k = 0; k < n; ++k) y(k) = b(perm_[static_cast<std::size_t>(k)]);

  l_.triangularView<Eigen::UnitLower>().solveInPlace(y);

  for (Eigen::Index k = 0; k < n;) {
    if (block_size_[static_cast<std::size_t>(k)] == 2) {
      const double d11 = d_diag_(k);
      const double d22 = d_diag_(k + 1);
      const double d21 = d_sub_(k);
      const double det = d11 * d22 - d21 * d21;
      const double y1 = y(k);
      const double y2 = y(k + 1);
      y(k) = (d22 * y1 - d21 * y2) / det;
      y(k + 1) = (d11 * y2 - d21 * y1) / det;
      k += 2;
    } else {
      y(k) /= d_diag_(k);
      ++k;
    }
  }

  l_.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(y);

  Eigen::VectorXd x(n);
  for (Eigen::Index k = 0; k < n; ++k) x(perm_[static_cast<std::size_t>(k)]) = y(k);
  return x;
}

}  // namespace pairflow
