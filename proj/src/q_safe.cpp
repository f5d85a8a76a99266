#include "safepg/q_safe.hpp"

#include <Eigen/Eigenvalues>

#include "safepg/basis.hpp"
#include "safepg/opt/linear_solve.hpp"

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Index of monomial z_i z_j (i <= j) in the quadratic feature order.
int pair_index(int dim, int i, int j) {
  return 1 + dim + i * dim - i * (i - 1) / 2 + (j - i);
}

VectorXd joint(const VectorXd& x, const VectorXd& u) {
  VectorXd z(x.size() + u.size());
  z << x, u;
  return z;
}

}  // namespace

double QuadraticQ::value(const VectorXd& x, const VectorXd& u) const {
  return weights.dot(quadratic_features(joint(x, u)));
}

MatrixXd QuadraticQ::input_curvature() const {
  const int dim = state_dim + input_dim;
  MatrixXd h = MatrixXd::Zero(input_dim, input_dim);
  for (int i = 0; i < input_dim; ++i)
    for (int j = i; j < input_dim; ++j) {
      const double c = weights[pair_index(dim, state_dim + i, state_dim + j)];
      if (i == j)
        h(i, i) = 2.0 * c;
      else {
        h(i, j) = c;
        h(j, i) = c;
      }
    }
  return h;
}

VectorXd QuadraticQ::input_linear_term(const VectorXd& x) const {
  const int dim = state_dim + input_dim;
  VectorXd g(input_dim);
  for (int i = 0; i < input_dim; ++i) {
    double gi = weights[1 + state_dim + i];
    for (int j = 0; j < state_dim; ++j)
      gi += weights[pair_index(dim, j, state_dim + i)] * x[j];
    g[i] = gi;
  }
  return g;
}

QuadraticQ QuadraticQ::from_input_quadratic(const MatrixXd& hessian,
                                            const VectorXd& linear, double constant,
                                            int state_dim) {
  QuadraticQ q;
  q.state_dim = state_dim;
  q.input_dim = static_cast<int>(linear.size());
  const int dim = q.state_dim + q.input_dim;
  q.weights = VectorXd::Zero(quadratic_basis_dim(dim));
  q.weights[0] = constant;
  for (int i = 0; i < q.input_dim; ++i) q.weights[1 + state_dim + i] = linear[i];
  for (int i = 0; i < q.input_dim; ++i)
    for (int j = i; j < q.input_dim; ++j)
      q.weights[pair_index(dim, state_dim + i, state_dim + j)] =
          (i == j) ? 0.5 * hessian(i, i) : hessian(i, j);
  return q;
}

Eigen::VectorXd extract_safe_policy(const QuadraticQ& q, const ConstraintSet& set,
                                    const VectorXd& x) {
  MatrixXd h = q.input_curvature();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  if (es.eigenvalues().minCoeff() < 1e-9)
    raise(ErrorCode::invalid_argument, "Q curvature in u is not positive definite");
  opt::QpProblem qp = safe_set_qp(set, x, h, q.input_linear_term(x), nullptr);
  opt::KktSolution sol;
  try {
    sol = opt::solve_qp(qp, VectorXd::Zero(q.input_dim));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::infeasible)
      raise(ErrorCode::infeasible_safe_set, "safe set is empty at this state");
    throw;
  }
  return sol.primal;
}

Eigen::VectorXd extract_projected_policy(const QuadraticQ& q, const ConstraintSet& set,
                                         const VectorXd& x) {
  MatrixXd h = q.input_curvature();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  if (es.eigenvalues().minCoeff() < 1e-9)
    raise(ErrorCode::invalid_argument, "Q curvature in u is not positive definite");
  VectorXd unconstrained = opt::linear_solve(h, -q.input_linear_term(x));
  return project(set, x, unconstrained).projected;
}

QuadraticQ fit_q_lstdq(std::span<const QTransition> batch, double gamma) {
  if (batch.empty()) raise(ErrorCode::empty_batch, "LSTDQ needs a nonempty batch");
  const int n = static_cast<int>(batch.front().x.size());
  const int m = static_cast<int>(batch.front().u.size());
  const int dim = quadratic_basis_dim(n + m);
  MatrixXd sys = MatrixXd::Zero(dim, dim);
  VectorXd rhs = VectorXd::Zero(dim);
  for (const auto& t : batch) {
    const VectorXd f = quadratic_features(joint(t.x, t.u));
    const VectorXd fn = quadratic_features(joint(t.x_next, t.u_next));
    sys += f * (f - gamma * fn).transpose();
    rhs += f * t.cost;
  }
  double residual = 0.0;
  QuadraticQ q;
  q.state_dim = n;
  q.input_dim = m;
  q.weights = ridge_refined_solve(sys, rhs, kGramRidge, &residual);
  if (residual > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    raise(ErrorCode::singular_gram, "LSTDQ system inconsistent: insufficient excitation");
  return q;
}

Eigen::VectorXd sample_safe_uniform(const ConstraintSet& set, const VectorXd& x,
                                    const VectorXd& lo, const VectorXd& hi,
                                    RngStream& rng, int max_tries) {
  VectorXd u(lo.size());
  for (int t = 0; t < max_tries; ++t) {
    for (int i = 0; i < u.size(); ++i) u[i] = rng.uniform(lo[i], hi[i]);
    if (set.is_member(x, u)) return u;
  }
  raise(ErrorCode::infeasible_safe_set, "rejection sampling found no safe input");
}

}  // namespace safepg
