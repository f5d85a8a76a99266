#include "safepg/opt/linear_solve.hpp"

#include <Eigen/LU>

#include "safepg/errors.hpp"

namespace safepg::opt {

Eigen::VectorXd linear_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             double* rcond_out) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    raise(ErrorCode::dimension_mismatch, "linear_solve needs square A matching b");

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double pmin = pivots.minCoeff();
  if (pmin < 1e-14) raise(ErrorCode::singular, "linear_solve pivot below 1e-14");
  if (rcond_out) *rcond_out = pmin / pivots.maxCoeff();

  Eigen::VectorXd x = lu.solve(b);
  x += lu.solve(b - A * x);
  return x;
}

}  // namespace safepg::opt
