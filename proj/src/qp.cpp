#include "safepg/opt/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace safepg::opt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kStepTol = 1e-12;
constexpr double kMultSignTol = 1e-10;

struct EqpStep {
  VectorXd direction;
  VectorXd lambda;  // multipliers of the working-set rows
};

// Equality-constrained step on the current working set, solved in the null
// space of the working rows so a badly scaled Hessian cannot amplify
// multiplier round-off into spurious steps:
//   d = Z y,  (Z'HZ) y = -Z'(H u + g),  Gw' lambda = -(H u + g + H d).
EqpStep solve_eqp(const MatrixXd& H, const Eigen::LLT<MatrixXd>& hess_llt,
                  const MatrixXd& G, const std::vector<int>& working,
                  const VectorXd& grad) {
  EqpStep out;
  const int k = static_cast<int>(working.size());
  if (k == 0) {
    out.direction = -hess_llt.solve(grad);
    out.lambda.resize(0);
    return out;
  }
  const int n = static_cast<int>(grad.size());
  MatrixXd Gw(k, n);
  for (int i = 0; i < k; ++i) Gw.row(i) = G.row(working[i]);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(Gw.transpose());
  if (qr.rank() < k)
    raise(ErrorCode::rank_deficient, "QP working set became numerically dependent");
  MatrixXd q_full = qr.householderQ();
  MatrixXd z = q_full.rightCols(n - k);

  if (z.cols() == 0) {
    out.direction = VectorXd::Zero(n);
  } else {
    MatrixXd reduced = z.transpose() * H * z;
    Eigen::LLT<MatrixXd> red_llt(reduced);
    if (red_llt.info() != Eigen::Success)
      raise(ErrorCode::invalid_argument, "QP reduced hessian lost definiteness");
    out.direction = z * red_llt.solve(-z.transpose() * grad);
  }
  out.lambda = qr.solve(-(grad + H * out.direction));
  return out;
}

struct AffineResult {
  VectorXd primal;
  VectorXd multipliers;
  int iterations = 0;
};

// Primal active-set method; `start` must be feasible for G u <= b.
AffineResult active_set_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& G,
                           const VectorXd& b, VectorXd u, const QpSettings& settings) {
  const int m = static_cast<int>(G.rows());
  Eigen::LLT<MatrixXd> hess_llt(H);
  if (hess_llt.info() != Eigen::Success)
    raise(ErrorCode::invalid_argument, "QP hessian is not positive definite");

  std::vector<int> working;
  std::vector<char> in_working(m, 0);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    VectorXd grad = H * u + g;
    EqpStep step = solve_eqp(H, hess_llt, G, working, grad);

    if (step.direction.lpNorm<Eigen::Infinity>() <=
        kStepTol * (1.0 + u.lpNorm<Eigen::Infinity>())) {
      int drop = -1;
      double most_negative = -kMultSignTol;
      for (int i = 0; i < static_cast<int>(working.size()); ++i) {
        if (step.lambda[i] < most_negative) {
          most_negative = step.lambda[i];
          drop = i;
        }
      }
      if (drop < 0) {
        VectorXd mult = VectorXd::Zero(m);
        for (int i = 0; i < static_cast<int>(working.size()); ++i)
          mult[working[i]] = std::max(0.0, step.lambda[i]);
        return {u, mult, iter};
      }
      in_working[working[drop]] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test against all rows outside the working set.
    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < m; ++i) {
      if (in_working[i]) continue;
      const double gd = G.row(i).dot(step.direction);
      if (gd <= 1e-14) continue;
      const double slack = b[i] - G.row(i).dot(u);
      const double ai = std::max(0.0, slack) / gd;
      if (ai < alpha - 1e-15) {
        alpha = ai;
        blocker = i;
      }
    }

    u += alpha * step.direction;
    if (blocker >= 0) {
      // Keep the working-set Jacobian full rank; if the blocking row is
      // dependent, make room by dropping the least-binding working row.
      MatrixXd trial(static_cast<int>(working.size()) + 1, G.cols());
      for (int i = 0; i < static_cast<int>(working.size()); ++i)
        trial.row(i) = G.row(working[i]);
      trial.row(static_cast<int>(working.size())) = G.row(blocker);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(trial.transpose());
      if (qr.rank() < trial.rows() && !working.empty()) {
        int drop = 0;
        double smallest = std::abs(step.lambda.size() ? step.lambda[0] : 0.0);
        for (int i = 1; i < static_cast<int>(working.size()); ++i) {
          if (std::abs(step.lambda[i]) < smallest) {
            smallest = std::abs(step.lambda[i]);
            drop = i;
          }
        }
        in_working[working[drop]] = 0;
        working.erase(working.begin() + drop);
      }
      working.push_back(blocker);
      in_working[blocker] = 1;
    }
  }
  raise(ErrorCode::max_iterations, "active-set QP exceeded iteration limit");
}

// Feasible point for G u <= b, or Infeasible. Minimizes the worst violation
// t with a tiny primal regularization:
//   min 1/2 t^2 + eps/2 ||u||^2  s.t.  G u - t <= b.
// Runs down to round-off even for tiny violations so that SQP subproblem
// starts cannot stall the outer feasibility at the reporting tolerance;
// infeasibility itself is only declared past settings.feas_tol.
VectorXd phase1_feasible(const MatrixXd& G, const VectorXd& b, VectorXd start,
                         const QpSettings& settings) {
  const int m = static_cast<int>(G.rows());
  if (m == 0) return start;
  const double viol = (G * start - b).maxCoeff();
  if (viol <= 1e-13) return start;

  const int n = static_cast<int>(start.size());
  MatrixXd H1 = MatrixXd::Identity(n + 1, n + 1) * 1e-8;
  H1(n, n) = 1.0;
  MatrixXd G1(m, n + 1);
  G1 << G, -VectorXd::Ones(m);
  VectorXd v0(n + 1);
  v0 << start, viol + 1.0;
  AffineResult res = active_set_qp(H1, VectorXd::Zero(n + 1), G1, b, v0, settings);

  // The primal regularization biases the elastic optimum outward by an
  // epsilon-scale margin; a least-norm equality correction on the rows near
  // the boundary removes it exactly.
  VectorXd u = res.primal.head(n);
  double worst = (G * u - b).maxCoeff();
  if (worst > 1e-13) {
    std::vector<int> rows;
    for (int i = 0; i < m; ++i)
      if (G.row(i).dot(u) - b[i] > -1e-6) rows.push_back(i);
    const int k = static_cast<int>(rows.size());
    MatrixXd A(k, n);
    VectorXd r(k);
    for (int i = 0; i < k; ++i) {
      A.row(i) = G.row(rows[i]);
      r[i] = G.row(rows[i]).dot(u) - b[rows[i]];
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
    u -= cod.solve(r);
    worst = (G * u - b).maxCoeff();
  }
  if (worst > settings.feas_tol)
    raise(ErrorCode::infeasible, "no point satisfies the constraints within tolerance");
  return u;
}

Activity classify(double value, double multiplier, const QpSettings& s) {
  if (std::abs(value) > s.activity_value_tol) return Activity::inactive;
  return multiplier >= s.activity_multiplier_tol ? Activity::strictly_active
                                                 : Activity::weakly_active;
}

KktSolution package(const QpProblem& p, const VectorXd& u, const VectorXd& mult,
                    int iterations, const QpSettings& settings) {
  KktSolution out;
  out.primal = u;
  out.multipliers = mult;
  out.iterations = iterations;
  const int mc = p.num_constraints();
  out.constraint_values.resize(mc);
  out.activity.resize(mc);
  for (int i = 0; i < mc; ++i) {
    out.constraint_values[i] = p.constraint_value(i, u);
    out.activity[i] = classify(out.constraint_values[i], mult[i], settings);
  }
  out.kkt_residual = kkt_residual(p, u, mult);
  return out;
}

double merit(const QpProblem& p, const VectorXd& u, double penalty) {
  double f = 0.5 * u.dot(p.hessian * u) + p.linear.dot(u);
  double viol = 0.0;
  for (int i = 0; i < p.num_constraints(); ++i)
    viol += std::max(0.0, p.constraint_value(i, u));
  return f + penalty * viol;
}

// SQP with exact constraint Hessians (constant for quadratic constraints).
// Linearized feasible sets contain the true convex feasible set, so phase-1
// infeasibility of a subproblem certifies infeasibility of the QCQP.
KktSolution solve_qcqp(const QpProblem& p, VectorXd u, const QpSettings& settings) {
  const int n = p.dim();
  const int ma = p.num_affine();
  const int mq = static_cast<int>(p.quadratic.size());
  const int mc = ma + mq;

  if (ma > 0) u = phase1_feasible(p.ineq_jacobian, p.ineq_rhs, u, settings);

  VectorXd mult = VectorXd::Zero(mc);
  double penalty = 1.0;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const double residual = kkt_residual(p, u, mult);
    if (residual <= settings.kkt_tol) return package(p, u, mult, iter, settings);

    MatrixXd W = p.hessian;
    for (int j = 0; j < mq; ++j) W += 2.0 * mult[ma + j] * p.quadratic[j].P;

    // Linearize every constraint at u; affine rows are exact.
    MatrixXd Gs(mc, n);
    VectorXd bs(mc);
    for (int i = 0; i < mc; ++i) {
      Gs.row(i) = p.constraint_gradient(i, u).transpose();
      bs[i] = -p.constraint_value(i, u);
    }

    VectorXd grad = p.hessian * u + p.linear;
    VectorXd d0 = phase1_feasible(Gs, bs, VectorXd::Zero(n), settings);
    AffineResult sub = active_set_qp(W, grad, Gs, bs, d0, settings);

    penalty = std::max(penalty, 2.0 * sub.multipliers.lpNorm<Eigen::Infinity>() + 1.0);
    const double m0 = merit(p, u, penalty);
    double viol0 = 0.0;
    for (int i = 0; i < mc; ++i) viol0 += std::max(0.0, p.constraint_value(i, u));
    // l1-merit directional-derivative bound for the SQP step d = sub.primal.
    const double slope = grad.dot(sub.primal) - penalty * viol0;

    // Near the solution the predicted decrease drops below the round-off of
    // the merit value; take the full Newton-type step without certification.
    double alpha = 1.0;
    if (-slope > 1e-13 * (1.0 + std::abs(m0))) {
      VectorXd trial = u + sub.primal;
      while (merit(p, trial, penalty) > m0 + 0.1 * alpha * std::min(slope, 0.0) &&
             alpha > 1e-12) {
        alpha *= 0.5;
        trial = u + alpha * sub.primal;
      }
    }
    u += alpha * sub.primal;
    mult = sub.multipliers;
  }
  raise(ErrorCode::max_iterations, "SQP exceeded iteration limit");
}

}  // namespace

void QpProblem::validate() const {
  if (hessian.rows() != hessian.cols() || hessian.rows() != linear.size())
    raise(ErrorCode::dimension_mismatch, "QP hessian/linear dimensions disagree");
  if ((hessian - hessian.transpose()).lpNorm<Eigen::Infinity>() > 1e-12)
    raise(ErrorCode::invalid_argument, "QP hessian must be symmetric");
  if (ineq_jacobian.rows() != ineq_rhs.size())
    raise(ErrorCode::dimension_mismatch, "QP inequality rows/rhs disagree");
  if (ineq_jacobian.rows() > 0 && ineq_jacobian.cols() != dim())
    raise(ErrorCode::dimension_mismatch, "QP inequality column count disagrees");
  for (const auto& qc : quadratic) {
    if (qc.P.rows() != dim() || qc.P.cols() != dim() || qc.q.size() != dim())
      raise(ErrorCode::dimension_mismatch, "quadratic constraint dimensions disagree");
    if ((qc.P - qc.P.transpose()).lpNorm<Eigen::Infinity>() > 1e-12)
      raise(ErrorCode::invalid_argument, "quadratic constraint P must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(qc.P);
    if (es.eigenvalues().minCoeff() < -1e-10)
      raise(ErrorCode::invalid_argument, "quadratic constraint P must be PSD");
  }
}

double QpProblem::constraint_value(int i, const VectorXd& u) const {
  const int ma = num_affine();
  if (i < ma) return ineq_jacobian.row(i).dot(u) - ineq_rhs[i];
  const auto& qc = quadratic[i - ma];
  return u.dot(qc.P * u) + qc.q.dot(u) + qc.r;
}

VectorXd QpProblem::constraint_gradient(int i, const VectorXd& u) const {
  const int ma = num_affine();
  if (i < ma) return ineq_jacobian.row(i).transpose();
  const auto& qc = quadratic[i - ma];
  return 2.0 * qc.P * u + qc.q;
}

double kkt_residual(const QpProblem& p, const VectorXd& u, const VectorXd& mult) {
  VectorXd stat = p.hessian * u + p.linear;
  double feas = 0.0, comp = 0.0, sign = 0.0;
  for (int i = 0; i < p.num_constraints(); ++i) {
    const double si = p.constraint_value(i, u);
    stat += mult[i] * p.constraint_gradient(i, u);
    feas = std::max(feas, si);
    comp = std::max(comp, std::abs(mult[i] * si));
    sign = std::max(sign, -mult[i]);
  }
  return std::max({stat.lpNorm<Eigen::Infinity>(), std::max(0.0, feas), comp, sign});
}

KktSolution solve_qp(const QpProblem& problem, const VectorXd& start,
                     const QpSettings& settings) {
  problem.validate();
  if (start.size() != problem.dim())
    raise(ErrorCode::dimension_mismatch, "QP start point has wrong dimension");

  if (!problem.quadratic.empty()) return solve_qcqp(problem, start, settings);

  VectorXd u0 = phase1_feasible(problem.ineq_jacobian, problem.ineq_rhs, start, settings);
  AffineResult res = active_set_qp(problem.hessian, problem.linear,
                                   problem.ineq_jacobian, problem.ineq_rhs, u0, settings);
  return package(problem, res.primal, res.multipliers, res.iterations, settings);
}

}  // namespace safepg::opt
