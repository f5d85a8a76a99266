#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "safepg/policy.hpp"

namespace safepg {

/// Quadratic value model  V(x) = c + p'x + x'Px  stored as weights over the
/// monomial basis [1, x_i, x_i x_j].
struct ValueWeights {
  Eigen::VectorXd w;
  int state_dim = 0;

  double value(const Eigen::VectorXd& x) const;
  /// Symmetric P of the quadratic part.
  Eigen::MatrixXd quadratic_part() const;
};

struct CriticWeights {
  ValueWeights value;
  Eigen::VectorXd advantage;  // one weight per policy parameter
};

struct VTransition {
  Eigen::VectorXd x;
  double cost = 0.0;
  Eigen::VectorXd x_next;
};

struct ATransition {
  Eigen::VectorXd x;
  Eigen::VectorXd u_sample;   // unprojected policy sample
  Eigen::VectorXd u_applied;  // projected input applied to the system
  double cost = 0.0;
  Eigen::VectorXd x_next;
};

/// LSTD fit of the quadratic value model. The linear system is solved with
/// ridge-regularized refinement, so exactly representable chains are
/// reproduced to ~1e-12; raises singular_gram when the data admit no
/// consistent solution.
ValueWeights lstd_v(std::span<const VTransition> batch, double gamma);

/// Least-squares fit of the compatible advantage model
///   A_w(x, u_sample) = w' score(x, u_sample)
/// onto TD residuals cost + gamma V(x_next) - V(x). The score is evaluated at
/// the unprojected sample. Requires the score Gram matrix to have full rank.
Eigen::VectorXd lstd_compatible_advantage(std::span<const ATransition> batch,
                                          const ValueWeights& value,
                                          const GaussianPolicy& policy, double gamma);

double advantage_estimate(const Eigen::VectorXd& weights, const GaussianPolicy& policy,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& u_sample);

}  // namespace safepg
