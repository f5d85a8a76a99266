#pragma once

#include <Eigen/Dense>

namespace safepg::opt {

/// Orthonormal basis N of the null space of `jacobian` (rows = constraint
/// gradients), via column-pivoted QR of the transpose.
///
/// jacobian * N = 0 and N'N = I, both within 1e-12. A 0-row jacobian yields
/// the identity; a full-rank square jacobian yields a 0-column basis.
/// Raises rank_deficient when the rows are linearly dependent (LICQ failure).
Eigen::MatrixXd nullspace_orthonormal(const Eigen::MatrixXd& jacobian);

}  // namespace safepg::opt
