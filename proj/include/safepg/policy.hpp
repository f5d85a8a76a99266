#pragma once

#include <Eigen/Dense>

#include "safepg/errors.hpp"
#include "safepg/rng.hpp"

namespace safepg {

/// Affine state-feedback mean map  u = input_ref - gain * (x - state_ref).
/// Flattened parameter order: input_ref, state_ref, gain rows (row-major).
struct AffinePolicy {
  Eigen::VectorXd input_ref;
  Eigen::VectorXd state_ref;
  Eigen::MatrixXd gain;

  int state_dim() const { return static_cast<int>(state_ref.size()); }
  int input_dim() const { return static_cast<int>(input_ref.size()); }
  int param_count() const {
    return input_dim() + state_dim() + input_dim() * state_dim();
  }

  Eigen::VectorXd mean(const Eigen::VectorXd& x) const;

  /// Jacobian of the mean w.r.t. the flattened parameters; row p holds
  /// d mean / d theta_p (param_count x input_dim).
  Eigen::MatrixXd mean_param_jacobian(const Eigen::VectorXd& x) const;

  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& theta);
  static AffinePolicy from_params(const Eigen::VectorXd& theta, int state_dim,
                                  int input_dim);
  static AffinePolicy zero(int state_dim, int input_dim);
};

/// Isotropic Gaussian policy centred at an affine mean map.
struct GaussianPolicy {
  AffinePolicy mean;
  double sigma = 0.1;

  Eigen::VectorXd sample(const Eigen::VectorXd& x, RngStream& rng) const;
  double log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  /// Score d log pi(u | x) / d theta at the given sample.
  Eigen::VectorXd score(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

}  // namespace safepg
