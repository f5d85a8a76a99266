#pragma once

#include <Eigen/Dense>

namespace safepg::opt {

struct DareSolution {
  Eigen::MatrixXd gain;         // K with u = -K x stabilizing
  Eigen::MatrixXd cost_to_go;   // fixed-point P
  double residual = 0.0;        // max-norm Riccati fixed-point residual
  int iterations = 0;
};

/// Discrete algebraic Riccati equation by fixed-point iteration
/// (change tolerance 1e-12, at most 1e5 sweeps). Requires Q, R symmetric
/// positive definite and (A, B) stabilizable; raises no_convergence
/// otherwise. The returned gain satisfies spectral_radius(A - B K) < 1.
DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Spectral radius by dense eigenvalue computation.
double spectral_radius(const Eigen::MatrixXd& M);

}  // namespace safepg::opt
