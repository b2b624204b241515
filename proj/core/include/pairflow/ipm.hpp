#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pairflow/matcore.hpp"

namespace pairflow {

// Estimation of the intentional-volume factors by a primal-dual barrier
// method.
//
// Decision vector x = [w1; w2] (length 2N). The problem solved is
//
//   min  f(x) = sum_{i!=j} G_ij (K*_ij - V_ij)^2 + lambda (1 - G_ij) K*_ij^2
//   s.t. g(x) = w1 . w2 = 0
//        h(x) <= 0,  h = [-w1 ; -K*_ij for i<j]      (N + N(N-1)/2 rows)
//
// with slacks h + s = 0, s > 0, multiplier alpha for g and beta > 0 for h.
// mu denotes the barrier parameter; lambda is reserved for the
// regularization weight.

struct IpmConfig {
  double lambda_reg = 0.5;
  double mu0 = 1.0;
  double sigma = 0.2;
  double mu_min = 1e-9;
  double tol_kkt = 1e-8;
  double tol_orth = 1e-8;
  int max_outer = 60;
  int max_newton = 200;
  double ftb_tau = 0.995;
  std::uint64_t seed = 0;

  /// Throws InfeasibleConfig when a field is out of range.
  void validate() const;
};

struct IpmState {
  FactorPair w;
  Eigen::VectorXd s;
  double alpha = 0.0;
  Eigen::VectorXd beta;
  double mu = 1.0;
};

struct IpmIteration {
  int outer = 0;
  double mu = 0.0;
  double objective = 0.0;  // original volume units
  double residual = 0.0;   // scaled perturbed KKT residual after the step
  double merit_before = 0.0;
  double merit_after = 0.0;
  double step = 0.0;
  double hessian_shift = 0.0;
};

struct IpmReport {
  bool converged = false;
  int outer_iters = 0;
  int newton_iters = 0;
  double final_kkt_residual = 0.0;
  double final_orth = 0.0;  // |w1 . w2| on the volume-normalized problem
  double objective = 0.0;
  double lambda_reg = 0.0;
  double volume_scale = 1.0;
  double max_hessian_shift = 0.0;
  std::vector<IpmIteration> history;
};

struct ConstraintValues {
  double g_eq = 0.0;
  Eigen::VectorXd h;
};

struct ConstraintJacobians {
  Eigen::VectorXd jg;  // gradient of w1 . w2, length 2N
  Eigen::MatrixXd jh;  // (N + N(N-1)/2) x 2N
};

struct NewtonDirection {
  Eigen::VectorXd dw;
  Eigen::VectorXd ds;
  double dalpha = 0.0;
  Eigen::VectorXd dbeta;
  double hessian_shift = 0.0;     // delta added to the Lagrangian Hessian block
  double constraint_shift = 0.0;  // delta_c subtracted on the alpha diagonal
  bool used_cholesky = false;
  double relative_residual = 0.0;  // ||KKT d - rhs|| / ||rhs|| of the full system
};

/// Number of inequality rows, N + N(N-1)/2.
inline Index inequality_count(Index n) { return n + pair_count(n); }

double eval_objective(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g, double lambda_reg);

ConstraintValues eval_constraints(const FactorPair& w);

/// Gradient of eval_objective with respect to [w1; w2].
Eigen::VectorXd eval_jacobian(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g,
                              double lambda_reg);

/// Hessian of eval_objective with respect to [w1; w2]; exactly symmetric.
Eigen::MatrixXd eval_hessian(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g,
                             double lambda_reg);

ConstraintJacobians constraint_jacobians(const FactorPair& w);

/// Hessian of the Lagrangian f + alpha g + beta^T h in x.
Eigen::MatrixXd lagrangian_hessian(const IpmState& state, const VolumeMatrix& v, const PairGraph& g,
                                   double lambda_reg);

/// Newton direction for the perturbed KKT system at state.mu. The block
/// system in unknowns (dw, ds, dalpha, dbeta) is
///
///   [ W + dI   0      jg    Jh^T ] [dw    ]     [ grad f + alpha jg + Jh^T beta ]
///   [ 0        S^-1B  0     I    ] [ds    ] = - [ beta - mu S^-1 1              ]
///   [ jg^T     0      -dc   0    ] [dalpha]     [ g                             ]
///   [ Jh       I      0     0    ] [dbeta ]     [ h + s                         ]
///
/// and is solved after eliminating ds and dbeta. Throws DegenerateSystem when
/// the Hessian shift d exceeds its cap.
NewtonDirection assemble_and_solve_kkt(const IpmState& state, const VolumeMatrix& v,
                                       const PairGraph& g, double lambda_reg);

struct Estimate {
  FactorPair factors;
  IpmReport report;
};

/// Throws InconsistentInput when v is nonzero outside g, InvalidProblem when
/// n < 2. Non-convergence is reported through report.converged.
Estimate estimate(const VolumeMatrix& v, const PairGraph& g, const IpmConfig& config = {});

}  // namespace pairflow
