#include "safepg/opt/dare.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "safepg/errors.hpp"

namespace safepg::opt {

using Eigen::MatrixXd;

double spectral_radius(const MatrixXd& M) {
  return M.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

void require_spd(const MatrixXd& M, const char* name) {
  if ((M - M.transpose()).lpNorm<Eigen::Infinity>() > 1e-12)
    raise(ErrorCode::invalid_argument, std::string(name) + " must be symmetric");
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    raise(ErrorCode::invalid_argument, std::string(name) + " must be positive definite");
}

}  // namespace

DareSolution solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                        const MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols())
    raise(ErrorCode::dimension_mismatch, "DARE operand dimensions disagree");
  require_spd(Q, "Q");
  require_spd(R, "R");

  constexpr int kMaxIterations = 100000;
  constexpr double kChangeTol = 1e-12;

  MatrixXd P = Q;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    MatrixXd BtP = B.transpose() * P;
    Eigen::LLT<MatrixXd> inner(R + BtP * B);
    if (inner.info() != Eigen::Success)
      raise(ErrorCode::no_convergence, "DARE inner matrix lost definiteness");
    MatrixXd K = inner.solve(BtP * A);
    MatrixXd next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    next = 0.5 * (next + next.transpose());
    const double change = (next - P).lpNorm<Eigen::Infinity>();
    P = next;
    if (!P.allFinite() || P.lpNorm<Eigen::Infinity>() > 1e14)
      raise(ErrorCode::no_convergence, "DARE iteration diverged (unstabilizable pair?)");
    if (change <= kChangeTol) break;
  }
  if (iter >= kMaxIterations)
    raise(ErrorCode::no_convergence, "DARE iteration did not converge");

  DareSolution out;
  MatrixXd BtP = B.transpose() * P;
  Eigen::LLT<MatrixXd> inner(R + BtP * B);
  out.gain = inner.solve(BtP * A);
  out.cost_to_go = P;
  out.iterations = iter + 1;
  MatrixXd rebuilt = Q + A.transpose() * P * A - A.transpose() * P * B * out.gain;
  out.residual = (P - rebuilt).lpNorm<Eigen::Infinity>();
  if (out.residual > 1e-10)
    raise(ErrorCode::no_convergence, "DARE fixed-point residual above 1e-10");
  if (spectral_radius(A - B * out.gain) >= 1.0)
    raise(ErrorCode::no_convergence, "DARE gain does not stabilize the pair");
  return out;
}

}  // namespace safepg::opt
