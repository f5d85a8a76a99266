#include "safepg/policy_gradient.hpp"

#include <cmath>

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GradientEstimate reduce_terms(const std::vector<VectorXd>& terms, int dropped) {
  if (terms.empty())
    raise(ErrorCode::empty_batch, "gradient estimator received no usable samples");
  const int dim = static_cast<int>(terms.front().size());
  const auto n = static_cast<double>(terms.size());
  GradientEstimate out;
  out.sample_count = static_cast<int>(terms.size());
  out.dropped = dropped;
  out.gradient = VectorXd::Zero(dim);
  for (const auto& t : terms) out.gradient += t;
  out.gradient /= n;
  out.standard_error = VectorXd::Zero(dim);
  if (terms.size() > 1) {
    for (const auto& t : terms)
      out.standard_error += (t - out.gradient).cwiseAbs2();
    out.standard_error = (out.standard_error / (n * (n - 1.0))).cwiseSqrt();
  }
  return out;
}

GradientEstimate det_gradient(const AffinePolicy& policy,
                              std::span<const DetGradSample> batch, bool corrected) {
  if (batch.empty()) raise(ErrorCode::empty_batch, "deterministic gradient: empty batch");
  std::vector<VectorXd> terms;
  terms.reserve(batch.size());
  int dropped = 0;
  for (const auto& s : batch) {
    if (!s.outcome.licq_ok || s.outcome.weak_activity || !s.outcome.correction) {
      ++dropped;
      continue;
    }
    const MatrixXd jac = policy.mean_param_jacobian(s.x);
    if (corrected)
      terms.push_back(jac * (*s.outcome.correction) * s.advantage_input_gradient);
    else
      terms.push_back(jac * s.advantage_input_gradient);
  }
  return reduce_terms(terms, dropped);
}

GradientEstimate stoch_gradient(const GaussianPolicy& policy,
                                std::span<const StochGradSample> batch,
                                bool score_at_sample) {
  if (batch.empty()) raise(ErrorCode::empty_batch, "stochastic gradient: empty batch");
  std::vector<VectorXd> terms;
  terms.reserve(batch.size());
  for (const auto& s : batch) {
    const VectorXd& at = score_at_sample ? s.u_sample : s.u_projected;
    terms.push_back(policy.score(s.x, at) * s.advantage);
  }
  return reduce_terms(terms, 0);
}

}  // namespace

GradientEstimate det_policy_gradient_corrected(const AffinePolicy& policy,
                                               std::span<const DetGradSample> batch) {
  return det_gradient(policy, batch, true);
}

GradientEstimate det_policy_gradient_naive(const AffinePolicy& policy,
                                           std::span<const DetGradSample> batch) {
  return det_gradient(policy, batch, false);
}

GradientEstimate stoch_policy_gradient_corrected(const GaussianPolicy& policy,
                                                 std::span<const StochGradSample> batch) {
  return stoch_gradient(policy, batch, true);
}

GradientEstimate stoch_policy_gradient_naive(const GaussianPolicy& policy,
                                             std::span<const StochGradSample> batch) {
  return stoch_gradient(policy, batch, false);
}

VectorXd ascend(const VectorXd& theta, const GradientEstimate& estimate,
                double step_size) {
  if (step_size <= 0.0) raise(ErrorCode::invalid_argument, "step size must be positive");
  if (!estimate.gradient.allFinite())
    raise(ErrorCode::non_finite_gradient, "gradient estimate is not finite");
  return theta - step_size * estimate.gradient;
}

}  // namespace safepg
