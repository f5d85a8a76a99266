#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "safepg/policy.hpp"
#include "safepg/projection.hpp"

namespace safepg {

struct GradientEstimate {
  Eigen::VectorXd gradient;        // mean of the per-sample terms
  Eigen::VectorXd standard_error;  // per-coordinate SE of the mean
  int sample_count = 0;
  int dropped = 0;  // weak-activity / LICQ samples excluded from the mean
};

/// One deterministic-policy sample: the visited state, the projection outcome
/// at the policy mean, and the input-gradient of the advantage at the
/// projected input.
struct DetGradSample {
  Eigen::VectorXd x;
  ProjectionOutcome outcome;
  Eigen::VectorXd advantage_input_gradient;
};

/// One stochastic-policy sample: the score is taken at `u_sample`, the
/// advantage has already been evaluated at the projected input.
struct StochGradSample {
  Eigen::VectorXd x;
  Eigen::VectorXd u_sample;
  Eigen::VectorXd u_projected;
  double advantage = 0.0;
};

/// Mean of grad_theta(mean) * correction * grad_u(advantage). Samples whose
/// projection gradient is undefined (weak activity, LICQ failure) are dropped
/// and counted, never silently included.
GradientEstimate det_policy_gradient_corrected(const AffinePolicy& policy,
                                               std::span<const DetGradSample> batch);

/// Same estimator with the correction matrix omitted; biased whenever a
/// constraint is active. Drops the same samples as the corrected form so the
/// two are comparable term by term.
GradientEstimate det_policy_gradient_naive(const AffinePolicy& policy,
                                           std::span<const DetGradSample> batch);

/// Mean of score(x, u_sample) * advantage.
GradientEstimate stoch_policy_gradient_corrected(const GaussianPolicy& policy,
                                                 std::span<const StochGradSample> batch);

/// Score taken at the projected input instead of the sample; biased whenever
/// the projection clips samples.
GradientEstimate stoch_policy_gradient_naive(const GaussianPolicy& policy,
                                             std::span<const StochGradSample> batch);

/// One descent step on the cost: theta - step_size * gradient.
Eigen::VectorXd ascend(const Eigen::VectorXd& theta, const GradientEstimate& estimate,
                       double step_size);

}  // namespace safepg
