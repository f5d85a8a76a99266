#include "safepg/tube_mpc.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "safepg/opt/dare.hpp"

namespace safepg {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

Matrix2d NominalModel::a_matrix() const {
  const double rad = angle_deg * M_PI / 180.0;
  Matrix2d r;
  r << std::cos(rad), std::sin(rad), -std::sin(rad), std::cos(rad);
  return scale * r;
}

TubeMpcProblem build_tube(const TubeMpcConfig& config) {
  if (config.horizon < 1) raise(ErrorCode::invalid_argument, "horizon must be >= 1");
  if (config.noise_bound <= 0.0)
    raise(ErrorCode::invalid_argument, "noise bound must be positive");
  if (config.cost.w_u <= 0.0)
    raise(ErrorCode::invalid_argument, "tube MPC needs a positive input cost weight");
  if (config.cost.x_ref.size() != 2 || config.cost.u_ref.size() != 2)
    raise(ErrorCode::dimension_mismatch, "tube MPC cost references must be 2-D");

  TubeMpcProblem out;
  out.model = config.model;
  out.cost = config.cost;
  out.horizon = config.horizon;
  out.gamma = config.gamma;
  out.noise_bound = config.noise_bound;
  out.norm = config.norm;

  const Matrix2d a = config.model.a_matrix();
  const Matrix2d eye = Matrix2d::Identity();
  out.auxiliary_gain = opt::solve_dare(a, eye, eye, eye).gain;

  if (config.norm == TubeNorm::closed_loop_2) {
    Eigen::JacobiSVD<MatrixXd> svd(MatrixXd(a - out.auxiliary_gain));
    out.contraction = svd.singularValues()(0);
    if (out.contraction >= 1.0)
      raise(ErrorCode::tube_infeasible,
            "closed-loop dispersion propagator is not contractive");
  } else {
    out.contraction = a.cwiseAbs().rowwise().sum().maxCoeff();
  }

  out.radii.assign(static_cast<std::size_t>(config.horizon) + 1, 0.0);
  out.tightened.assign(out.radii.size(), 1.0);
  for (int k = 1; k <= config.horizon; ++k) {
    out.radii[k] = out.contraction * out.radii[k - 1] + config.noise_bound;
    out.tightened[k] = 1.0 - out.radii[k];
    if (out.tightened[k] <= 0.0)
      raise(ErrorCode::tube_infeasible,
            "dispersion radius reaches the constraint radius at step " + std::to_string(k));
  }
  return out;
}

namespace {

struct Condensed {
  opt::QpProblem qp;
  std::vector<MatrixXd> t_blocks;  // T_k: x_k = c_k + T_k U, k = 0..N
  std::vector<Vector2d> c_blocks;  // c_k = A^k x
};

// Dense condensing of the horizon problem over U = (u_0, ..., u_{N-1}).
Condensed condense(const TubeMpcProblem& p, const Vector2d& x, const Vector2d& target) {
  const int n = 2;
  const int horizon = p.horizon;
  const int dim = n * horizon;
  const Matrix2d a = p.model.a_matrix();

  Condensed out;
  out.t_blocks.resize(static_cast<std::size_t>(horizon) + 1);
  out.c_blocks.resize(static_cast<std::size_t>(horizon) + 1);
  out.t_blocks[0] = MatrixXd::Zero(n, dim);
  out.c_blocks[0] = x;
  for (int k = 1; k <= horizon; ++k) {
    out.c_blocks[k] = a * out.c_blocks[k - 1];
    out.t_blocks[k] = a * out.t_blocks[k - 1];
    out.t_blocks[k].block(0, n * (k - 1), n, n) = Matrix2d::Identity();
  }

  out.qp.hessian = MatrixXd::Zero(dim, dim);
  out.qp.linear = VectorXd::Zero(dim);
  out.qp.hessian.topLeftCorner(n, n) = Matrix2d::Identity();
  out.qp.linear.head(n) = -target;
  double discount = 1.0;
  for (int k = 1; k < horizon; ++k) {
    discount *= p.gamma;
    const MatrixXd& tk = out.t_blocks[k];
    out.qp.hessian += 2.0 * discount * p.cost.w_x * (tk.transpose() * tk);
    out.qp.linear += 2.0 * discount * p.cost.w_x *
                     (tk.transpose() * (out.c_blocks[k] - p.cost.x_ref));
    out.qp.hessian.block(n * k, n * k, n, n) +=
        2.0 * discount * p.cost.w_u * Matrix2d::Identity();
    out.qp.linear.segment(n * k, n) += -2.0 * discount * p.cost.w_u * p.cost.u_ref;
  }

  out.qp.ineq_jacobian.resize(0, dim);
  out.qp.ineq_rhs.resize(0);
  for (int k = 1; k <= horizon; ++k) {
    opt::QuadraticConstraint qc;
    qc.P = out.t_blocks[k].transpose() * out.t_blocks[k];
    qc.q = 2.0 * out.t_blocks[k].transpose() * out.c_blocks[k];
    qc.r = out.c_blocks[k].squaredNorm() - p.tightened[k] * p.tightened[k];
    out.qp.quadratic.push_back(std::move(qc));
  }
  return out;
}

}  // namespace

MpcSolution solve_projection_mpc(const TubeMpcProblem& problem, const Vector2d& x,
                                 const Vector2d& u_target) {
  if (x.squaredNorm() > 1.0 + 1e-9)
    raise(ErrorCode::infeasible, "state outside the recoverable set (x'x > 1)");
  Condensed cond = condense(problem, x, u_target);

  VectorXd start = VectorXd::Zero(2 * problem.horizon);
  start.head(2) = u_target;
  opt::KktSolution sol = opt::solve_qp(cond.qp, start);

  MpcSolution out;
  out.stacked_inputs = sol.primal;
  out.inputs.resize(static_cast<std::size_t>(problem.horizon));
  for (int k = 0; k < problem.horizon; ++k) out.inputs[k] = sol.primal.segment<2>(2 * k);
  out.nominal_states.resize(static_cast<std::size_t>(problem.horizon) + 1);
  out.nominal_states[0] = x;
  const Matrix2d a = problem.model.a_matrix();
  for (int k = 1; k <= problem.horizon; ++k)
    out.nominal_states[k] = a * out.nominal_states[k - 1] + out.inputs[k - 1];
  out.multipliers = sol.multipliers;
  out.activity = sol.activity;
  out.kkt_residual = sol.kkt_residual;
  out.weak_activity = sol.any_weakly_active();
  out.state = x;
  out.target = u_target;
  for (int k = 1; k <= problem.horizon; ++k)
    if (out.nominal_states[k].norm() > problem.tightened[k] + 1e-8)
      raise(ErrorCode::no_convergence,
            "nominal plan violates the tightened constraint at step " + std::to_string(k));
  return out;
}

Eigen::Matrix2d mpc_target_sensitivity(const TubeMpcProblem& problem,
                                       const MpcSolution& solution) {
  if (solution.weak_activity)
    raise(ErrorCode::weak_activity,
          "first-input sensitivity undefined: weakly active tube constraint");
  Condensed cond = condense(problem, solution.state, solution.target);
  const int dim = 2 * problem.horizon;
  const VectorXd& u = solution.stacked_inputs;

  std::vector<int> active;
  for (int k = 0; k < static_cast<int>(solution.activity.size()); ++k)
    if (solution.activity[k] == opt::Activity::strictly_active) active.push_back(k);
  const int na = static_cast<int>(active.size());

  MatrixXd w = cond.qp.hessian;
  for (int i = 0; i < na; ++i)
    w += 2.0 * solution.multipliers[active[i]] * cond.qp.quadratic[active[i]].P;
  MatrixXd jac(na, dim);
  for (int i = 0; i < na; ++i)
    jac.row(i) = cond.qp.constraint_gradient(active[i], u).transpose();
  if (na > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(jac.transpose());
    if (static_cast<int>(qr.rank()) < na)
      raise(ErrorCode::licq_violation,
            "first-input sensitivity undefined: active rows rank deficient");
  }

  MatrixXd kkt = MatrixXd::Zero(dim + na, dim + na);
  kkt.topLeftCorner(dim, dim) = w;
  if (na > 0) {
    kkt.topRightCorner(dim, na) = jac.transpose();
    kkt.bottomLeftCorner(na, dim) = jac;
  }
  MatrixXd rhs = MatrixXd::Zero(dim + na, 2);
  rhs.topLeftCorner(2, 2) = Matrix2d::Identity();
  Eigen::PartialPivLU<MatrixXd> lu(kkt);
  MatrixXd sens = lu.solve(rhs);
  return sens.topLeftCorner(2, 2);
}

Eigen::MatrixXd mpc_first_input_sensitivity(const TubeMpcProblem& problem,
                                            const MpcSolution& solution,
                                            const MatrixXd& policy_jacobian) {
  const Matrix2d s0 = mpc_target_sensitivity(problem, solution);
  return policy_jacobian * s0.transpose();
}

Eigen::Vector2d mpc_stochastic_projection(const TubeMpcProblem& problem,
                                          const Vector2d& x, const Vector2d& u_sample) {
  return solve_projection_mpc(problem, x, u_sample).inputs[0];
}

}  // namespace safepg
