#pragma once

#include <Eigen/Dense>

namespace safepg::opt {

/// Dense LU solve with full pivoting and one refinement step.
/// Raises singular when the smallest pivot falls below 1e-14. When
/// `rcond_out` is given it receives |p_min| / |p_max| of the pivots.
Eigen::VectorXd linear_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             double* rcond_out = nullptr);

}  // namespace safepg::opt
