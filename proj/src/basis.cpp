#include "safepg/basis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace safepg {

int quadratic_basis_dim(int dim) { return 1 + dim + dim * (dim + 1) / 2; }

Eigen::VectorXd quadratic_features(const Eigen::VectorXd& z) {
  const int n = static_cast<int>(z.size());
  Eigen::VectorXd f(quadratic_basis_dim(n));
  int k = 0;
  f[k++] = 1.0;
  for (int i = 0; i < n; ++i) f[k++] = z[i];
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) f[k++] = z[i] * z[j];
  return f;
}

Eigen::VectorXd ridge_refined_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                                    double ridge, double* residual_out) {
  const int n = static_cast<int>(M.rows());
  Eigen::MatrixXd reg = M + ridge * Eigen::MatrixXd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(reg);
  Eigen::VectorXd w = lu.solve(rhs);
  Eigen::VectorXd best = w;
  double best_res = (rhs - M * w).lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd r = rhs - M * w;
    const double rnorm = r.lpNorm<Eigen::Infinity>();
    if (rnorm <= 1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
    // bail out once refinement stalls; further sweeps only accumulate noise
    if (rnorm > 0.5 * best_res && it > 0) break;
    w += lu.solve(r);
    const double after = (rhs - M * w).lpNorm<Eigen::Infinity>();
    if (after < best_res) {
      best_res = after;
      best = w;
    }
  }
  if ((rhs - M * w).lpNorm<Eigen::Infinity>() > best_res) w = best;
  if (residual_out) *residual_out = (rhs - M * w).lpNorm<Eigen::Infinity>();
  return w;
}

Eigen::VectorXd psd_minimal_norm_solve(const Eigen::MatrixXd& gram,
                                       const Eigen::VectorXd& rhs, double abs_cutoff,
                                       double* residual_out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double lmax = evals.cwiseAbs().maxCoeff();
  const double cutoff = std::max(abs_cutoff, 1e-12 * lmax);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(gram.rows());
  for (int i = 0; i < evals.size(); ++i) {
    if (evals[i] <= cutoff) continue;
    const Eigen::VectorXd v = es.eigenvectors().col(i);
    w += v * (v.dot(rhs) / evals[i]);
  }
  if (residual_out) *residual_out = (rhs - gram * w).lpNorm<Eigen::Infinity>();
  return w;
}

}  // namespace safepg
