#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace tdr {

struct ConstrainedLsOptions {
  double tolerance = 1e-9;        ///< on the scaled KKT residual
  std::size_t max_iterations = 0; ///< 0 picks 50 * dim + 200
};

struct ConstrainedLsResult {
  Eigen::VectorXd beta;
  double objective = 0.0;      ///< ||H beta||^2
  double kkt_residual = 0.0;   ///< scaled; below `tolerance` on success
  std::size_t iterations = 0;
};

/// Minimizes ||H beta||^2 subject to c^T beta = 1 and beta >= 0.
///
/// Primal active-set method. Each working-set subproblem is solved in the
/// null space of c restricted to the free coordinates, with a minimum-norm
/// least-squares step so rank-deficient H (including H = 0) is handled. The
/// iterate stays feasible throughout. Throws InvalidInput if c has no positive
/// entry and NumericalError if the iteration cap is reached.
ConstrainedLsResult solve_constrained_ls(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                                         const ConstrainedLsOptions& options = {});

/// Scaled KKT residual of a candidate point; used by the solver and by tests.
double constrained_ls_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& beta);

}  // namespace tdr
