#pragma once

#include <Eigen/Dense>
#include <vector>

#include "safepg/errors.hpp"

namespace safepg::opt {

/// One convex quadratic inequality  u'P u + q'u + r <= 0  with P symmetric PSD.
struct QuadraticConstraint {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double r = 0.0;
};

/// min 1/2 u'H u + g'u   s.t.  G u <= b   and optional quadratic constraints.
///
/// H must be symmetric positive definite; the feasible set is detected, not
/// assumed, to be nonempty.
struct QpProblem {
  Eigen::MatrixXd hessian;        // H
  Eigen::VectorXd linear;         // g
  Eigen::MatrixXd ineq_jacobian;  // G, may have zero rows
  Eigen::VectorXd ineq_rhs;       // b
  std::vector<QuadraticConstraint> quadratic;

  int dim() const { return static_cast<int>(hessian.rows()); }
  int num_affine() const { return static_cast<int>(ineq_jacobian.rows()); }
  int num_constraints() const { return num_affine() + static_cast<int>(quadratic.size()); }

  /// Checks symmetry of H (1e-12) and PSD-ness of each quadratic term.
  void validate() const;

  /// Value of constraint i at u (affine rows first, then quadratic).
  double constraint_value(int i, const Eigen::VectorXd& u) const;
  Eigen::VectorXd constraint_gradient(int i, const Eigen::VectorXd& u) const;
};

enum class Activity { inactive, weakly_active, strictly_active };

struct KktSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd multipliers;        // one per constraint, affine rows first
  Eigen::VectorXd constraint_values;  // s_i(u) at the solution, same order
  std::vector<Activity> activity;
  double kkt_residual = 0.0;
  int iterations = 0;

  bool any_weakly_active() const {
    for (Activity a : activity)
      if (a == Activity::weakly_active) return true;
    return false;
  }
};

struct QpSettings {
  double kkt_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 300;
  // |s_i| <= value_tol splits active from inactive; the multiplier threshold
  // splits strictly from weakly active.
  double activity_value_tol = 1e-7;
  double activity_multiplier_tol = 1e-7;
};

/// Active-set solve for affine-only problems (finite termination); SQP outer
/// loop with exact constraint Hessians when quadratic constraints are present.
KktSolution solve_qp(const QpProblem& problem, const Eigen::VectorXd& start,
                     const QpSettings& settings = {});

/// Max-norm KKT residual (stationarity, feasibility, complementarity,
/// multiplier sign) of a candidate primal-dual pair.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& multipliers);

}  // namespace safepg::opt
