#pragma once

#include <vector>

#include <Eigen/Dense>

namespace pairflow {

/// Eigenvalue sign counts of a symmetric matrix.
struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;

  friend bool operator==(const Inertia&, const Inertia&) = default;
};

/// Dense Bunch-Kaufman factorization P A P^T = L D L^T of a symmetric
/// (possibly indefinite) matrix, with D block diagonal in 1x1 and 2x2 blocks.
///
/// Only the lower triangle of the input is read. Pivots whose magnitude falls
/// below `zero_pivot_tol * max|A|` are counted as zero eigenvalues; solve()
/// must not be called in that case.
class SymmetricIndefiniteLdlt {
 public:
  SymmetricIndefiniteLdlt() = default;
  explicit SymmetricIndefiniteLdlt(const Eigen::MatrixXd& a, double zero_pivot_tol = 1e-14) {
    compute(a, zero_pivot_tol);
  }

  void compute(const Eigen::MatrixXd& a, double zero_pivot_tol = 1e-14);

  Inertia inertia() const { return inertia_; }
  bool singular() const { return inertia_.zero > 0; }
  Eigen::Index size() const { return l_.rows(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  Eigen::MatrixXd l_;             // unit lower triangular
  Eigen::VectorXd d_diag_;        // D diagonal
  Eigen::VectorXd d_sub_;         // D subdiagonal (nonzero only inside 2x2 blocks)
  std::vector<int> block_size_;   // 1 or 2 at the first index of each block, 0 otherwise
  std::vector<Eigen::Index> perm_;  // row k of P A P^T is row perm_[k] of A
  Inertia inertia_;
};

}  // namespace pairflow
