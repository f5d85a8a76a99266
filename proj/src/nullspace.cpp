#include "safepg/opt/nullspace.hpp"

#include <Eigen/QR>

#include "safepg/errors.hpp"

namespace safepg::opt {

Eigen::MatrixXd nullspace_orthonormal(const Eigen::MatrixXd& jacobian) {
  const int dim = static_cast<int>(jacobian.cols());
  const int rows = static_cast<int>(jacobian.rows());
  if (rows == 0) return Eigen::MatrixXd::Identity(dim, dim);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jacobian.transpose());
  const int rank = static_cast<int>(qr.rank());
  if (rank < rows)
    raise(ErrorCode::rank_deficient,
          "active constraint Jacobian is rank deficient (LICQ violated)");

  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(dim - rank);
}

}  // namespace safepg::opt
