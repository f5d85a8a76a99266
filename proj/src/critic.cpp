#include "safepg/critic.hpp"

#include <Eigen/Eigenvalues>

#include "safepg/basis.hpp"

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ValueWeights::value(const VectorXd& x) const {
  return w.dot(quadratic_features(x));
}

MatrixXd ValueWeights::quadratic_part() const {
  const int n = state_dim;
  MatrixXd p = MatrixXd::Zero(n, n);
  int k = 1 + n;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double c = w[k++];
      if (i == j)
        p(i, i) = c;
      else {
        p(i, j) = 0.5 * c;
        p(j, i) = 0.5 * c;
      }
    }
  return p;
}

ValueWeights lstd_v(std::span<const VTransition> batch, double gamma) {
  if (batch.empty()) raise(ErrorCode::empty_batch, "lstd_v needs a nonempty batch");
  const int n = static_cast<int>(batch.front().x.size());
  const int dim = quadratic_basis_dim(n);
  MatrixXd m = MatrixXd::Zero(dim, dim);
  VectorXd rhs = VectorXd::Zero(dim);
  for (const auto& t : batch) {
    const VectorXd f = quadratic_features(t.x);
    const VectorXd fn = quadratic_features(t.x_next);
    m += f * (f - gamma * fn).transpose();
    rhs += f * t.cost;
  }
  double residual = 0.0;
  ValueWeights out;
  out.state_dim = n;
  out.w = ridge_refined_solve(m, rhs, kGramRidge, &residual);
  if (residual > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    raise(ErrorCode::singular_gram, "LSTD system inconsistent: insufficient excitation");
  return out;
}

VectorXd lstd_compatible_advantage(std::span<const ATransition> batch,
                                   const ValueWeights& value,
                                   const GaussianPolicy& policy, double gamma) {
  if (batch.empty())
    raise(ErrorCode::empty_batch, "advantage regression needs a nonempty batch");
  const int dim = policy.mean.param_count();
  if (static_cast<int>(batch.size()) < dim)
    raise(ErrorCode::singular_gram, "advantage regression is underdetermined");

  MatrixXd gram = MatrixXd::Zero(dim, dim);
  VectorXd rhs = VectorXd::Zero(dim);
  for (const auto& t : batch) {
    const VectorXd psi = policy.score(t.x, t.u_sample);
    const double delta = t.cost + gamma * value.value(t.x_next) - value.value(t.x);
    gram += psi * psi.transpose();
    rhs += psi * delta;
  }
  // The affine-policy score is structurally rank deficient (the state_ref
  // block equals gain' times the input_ref block), so the regression is
  // solved in minimal-norm form on the identifiable span.
  double residual = 0.0;
  VectorXd w = psd_minimal_norm_solve(gram, rhs, kGramRidge, &residual);
  if (residual > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    raise(ErrorCode::singular_gram, "advantage regression system is inconsistent");
  return w;
}

double advantage_estimate(const VectorXd& weights, const GaussianPolicy& policy,
                          const VectorXd& x, const VectorXd& u_sample) {
  return weights.dot(policy.score(x, u_sample));
}

}  // namespace safepg
