#include "safepg/policy.hpp"

#include <cmath>

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd AffinePolicy::mean(const VectorXd& x) const {
  return input_ref - gain * (x - state_ref);
}

MatrixXd AffinePolicy::mean_param_jacobian(const VectorXd& x) const {
  const int m = input_dim();
  const int n = state_dim();
  MatrixXd jac = MatrixXd::Zero(param_count(), m);
  jac.topRows(m) = MatrixXd::Identity(m, m);            // d/d input_ref
  jac.middleRows(m, n) = gain.transpose();              // d/d state_ref
  const VectorXd dx = x - state_ref;
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < n; ++q)
      jac(m + n + p * n + q, p) = -dx[q];               // d/d gain(p, q)
  return jac;
}

VectorXd AffinePolicy::params() const {
  VectorXd theta(param_count());
  theta.head(input_dim()) = input_ref;
  theta.segment(input_dim(), state_dim()) = state_ref;
  for (int p = 0; p < input_dim(); ++p)
    theta.segment(input_dim() + state_dim() + p * state_dim(), state_dim()) =
        gain.row(p).transpose();
  return theta;
}

void AffinePolicy::set_params(const VectorXd& theta) {
  if (theta.size() != param_count())
    raise(ErrorCode::dimension_mismatch, "policy parameter vector has wrong length");
  input_ref = theta.head(input_dim());
  state_ref = theta.segment(input_dim(), state_dim());
  for (int p = 0; p < input_dim(); ++p)
    gain.row(p) =
        theta.segment(input_dim() + state_dim() + p * state_dim(), state_dim()).transpose();
}

AffinePolicy AffinePolicy::from_params(const VectorXd& theta, int state_dim,
                                       int input_dim) {
  AffinePolicy p = zero(state_dim, input_dim);
  p.set_params(theta);
  return p;
}

AffinePolicy AffinePolicy::zero(int state_dim, int input_dim) {
  AffinePolicy p;
  p.input_ref = VectorXd::Zero(input_dim);
  p.state_ref = VectorXd::Zero(state_dim);
  p.gain = MatrixXd::Zero(input_dim, state_dim);
  return p;
}

VectorXd GaussianPolicy::sample(const VectorXd& x, RngStream& rng) const {
  if (sigma <= 0.0) raise(ErrorCode::invalid_argument, "policy sigma must be positive");
  VectorXd u = mean.mean(x);
  for (int i = 0; i < u.size(); ++i) u[i] += sigma * rng.gauss();
  return u;
}

double GaussianPolicy::log_density(const VectorXd& x, const VectorXd& u) const {
  const VectorXd diff = u - mean.mean(x);
  const int m = static_cast<int>(u.size());
  return -0.5 * diff.squaredNorm() / (sigma * sigma) -
         0.5 * m * std::log(2.0 * M_PI * sigma * sigma);
}

VectorXd GaussianPolicy::score(const VectorXd& x, const VectorXd& u) const {
  if (sigma <= 0.0) raise(ErrorCode::invalid_argument, "policy sigma must be positive");
  const VectorXd diff = (u - mean.mean(x)) / (sigma * sigma);
  return mean.mean_param_jacobian(x) * diff;
}

}  // namespace safepg
