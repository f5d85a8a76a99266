#pragma once

#include <Eigen/Dense>

namespace safepg {

/// Ridge regularization applied to every Gram-type factorization.
inline constexpr double kGramRidge = 1e-8;

/// Number of monomials of degree <= 2 in `dim` variables.
int quadratic_basis_dim(int dim);

/// Features [1, z_i, z_i z_j (i <= j)] in a fixed order.
Eigen::VectorXd quadratic_features(const Eigen::VectorXd& z);

/// Solves M w = rhs with ridge regularization on the factorization and
/// iterative refinement against the unregularized system, so consistent
/// (possibly rank-deficient) systems are solved to near machine precision.
/// `residual_out`, when given, receives the final unregularized residual.
Eigen::VectorXd ridge_refined_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                                    double ridge, double* residual_out = nullptr);

/// Minimal-norm solve of a symmetric PSD system by spectral truncation;
/// eigenvalues below max(abs_cutoff, 1e-12 * lambda_max) are treated as the
/// null space, which keeps structurally rank-deficient Gram matrices from
/// amplifying round-off into the solution.
Eigen::VectorXd psd_minimal_norm_solve(const Eigen::MatrixXd& gram,
                                       const Eigen::VectorXd& rhs, double abs_cutoff,
                                       double* residual_out = nullptr);

}  // namespace safepg
