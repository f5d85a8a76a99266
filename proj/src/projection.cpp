#include "safepg/projection.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "safepg/opt/nullspace.hpp"

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

opt::QpProblem safe_set_qp(const ConstraintSet& set, const VectorXd& x,
                           MatrixXd hessian, VectorXd linear,
                           std::vector<int>* component_of) {
  for (const auto& c : set.components()) {
    if (!c.depends_on_input() &&
        c.value(x, VectorXd::Zero(linear.size())) > ConstraintSet::kMembershipTol)
      raise(ErrorCode::infeasible_safe_set, "safe set is empty at this state");
  }
  const int n = static_cast<int>(linear.size());
  opt::QpProblem problem;
  problem.hessian = std::move(hessian);
  problem.linear = std::move(linear);
  if (component_of) component_of->clear();

  std::vector<int> affine_ids, quad_ids;
  for (int i = 0; i < set.size(); ++i) {
    const auto& c = set.components()[i];
    if (!c.depends_on_input()) continue;
    if (c.kind == ConstraintKind::affine)
      affine_ids.push_back(i);
    else
      quad_ids.push_back(i);
  }
  problem.ineq_jacobian.resize(static_cast<int>(affine_ids.size()), n);
  problem.ineq_rhs.resize(static_cast<int>(affine_ids.size()));
  for (std::size_t k = 0; k < affine_ids.size(); ++k) {
    const auto& c = set.components()[affine_ids[k]];
    problem.ineq_jacobian.row(static_cast<int>(k)) = c.row.transpose();
    problem.ineq_rhs[static_cast<int>(k)] = c.rhs;
    if (component_of) component_of->push_back(affine_ids[k]);
  }
  for (int id : quad_ids) {
    const auto& c = set.components()[id];
    opt::QuadraticConstraint qc;
    qc.P = MatrixXd::Identity(n, n);
    qc.q = -2.0 * c.center;
    qc.r = c.center.squaredNorm() - c.radius * c.radius;
    problem.quadratic.push_back(std::move(qc));
    if (component_of) component_of->push_back(id);
  }
  return problem;
}

ProjectionOutcome project(const ConstraintSet& set, const VectorXd& x,
                          const VectorXd& target) {
  const int n = static_cast<int>(target.size());
  std::vector<int> component_of;
  opt::QpProblem qp =
      safe_set_qp(set, x, MatrixXd::Identity(n, n), -target, &component_of);

  opt::KktSolution sol;
  try {
    sol = opt::solve_qp(qp, target);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::infeasible)
      raise(ErrorCode::infeasible_safe_set, "safe set is empty at this state");
    throw;
  }

  ProjectionOutcome out;
  out.projected = sol.primal;
  out.kkt_residual = sol.kkt_residual;
  out.multipliers = VectorXd::Zero(set.size());
  for (int k = 0; k < qp.num_constraints(); ++k)
    out.multipliers[component_of[k]] = sol.multipliers[k];

  for (int k = 0; k < qp.num_constraints(); ++k) {
    if (sol.activity[k] == opt::Activity::strictly_active)
      out.active.push_back(component_of[k]);
    else if (sol.activity[k] == opt::Activity::weakly_active)
      out.weak_activity = true;
  }
  std::sort(out.active.begin(), out.active.end());

  MatrixXd active_jac(static_cast<int>(out.active.size()), n);
  for (std::size_t i = 0; i < out.active.size(); ++i)
    active_jac.row(static_cast<int>(i)) =
        set.components()[out.active[i]].input_gradient(out.projected).transpose();

  out.curvature = MatrixXd::Identity(n, n);
  for (int id : out.active)
    out.curvature += out.multipliers[id] * set.components()[id].input_hessian(n);

  try {
    out.nullspace = opt::nullspace_orthonormal(active_jac);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::rank_deficient) throw;
    out.licq_ok = false;
    out.nullspace.resize(n, 0);
    return out;
  }

  // correction = N (N' H N)^{-1} N', via a solve against the reduced Hessian.
  if (out.nullspace.cols() == 0) {
    out.correction = MatrixXd::Zero(n, n);
  } else {
    MatrixXd reduced = out.nullspace.transpose() * out.curvature * out.nullspace;
    Eigen::LLT<MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success)
      raise(ErrorCode::invalid_argument, "reduced projection Hessian lost definiteness");
    out.correction = out.nullspace * llt.solve(out.nullspace.transpose());
  }
  return out;
}

MatrixXd policy_jacobian_projected(const ProjectionOutcome& outcome,
                                   const MatrixXd& policy_jacobian) {
  if (!outcome.licq_ok)
    raise(ErrorCode::licq_violation, "projection gradient undefined: LICQ violated");
  if (outcome.weak_activity)
    raise(ErrorCode::weak_activity,
          "projection gradient undefined: weakly active constraint");
  if (!outcome.correction)
    raise(ErrorCode::licq_violation, "projection outcome carries no correction matrix");
  return policy_jacobian * (*outcome.correction);
}

VectorXd project_interior_point(const ConstraintSet& set, const VectorXd& x,
                                const VectorXd& target, double tau) {
  if (tau <= 0.0) raise(ErrorCode::invalid_argument, "barrier weight must be positive");
  const int n = static_cast<int>(target.size());

  std::vector<const ConstraintComponent*> input_cons;
  for (const auto& c : set.components()) {
    if (!c.depends_on_input()) {
      if (c.value(x, target) >= 0.0)
        raise(ErrorCode::no_interior_point, "state condition admits no interior");
      continue;
    }
    input_cons.push_back(&c);
  }

  // Strictly feasible start: ball centers when available, else pull the
  // projection of the origin slightly inside along the anti-gradient.
  VectorXd u = VectorXd::Zero(n);
  auto max_value = [&](const VectorXd& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto* c : input_cons) m = std::max(m, c->value(x, v));
    return input_cons.empty() ? -1.0 : m;
  };
  if (max_value(u) >= 0.0) {
    for (auto* c : input_cons)
      if (c->kind == ConstraintKind::input_ball) u = c->center;
    if (max_value(u) >= 0.0) {
      ProjectionOutcome feas = project(set, x, u);
      VectorXd inward = VectorXd::Zero(n);
      for (auto* c : input_cons) {
        const double v = c->value(x, feas.projected);
        if (v > -1e-9) inward -= c->input_gradient(feas.projected);
      }
      if (inward.norm() < 1e-12)
        raise(ErrorCode::no_interior_point, "could not find a strictly interior point");
      inward.normalize();
      double step = 1.0;
      u = feas.projected + step * inward;
      while (max_value(u) >= 0.0 && step > 1e-12) {
        step *= 0.5;
        u = feas.projected + step * inward;
      }
      if (max_value(u) >= 0.0)
        raise(ErrorCode::no_interior_point, "could not find a strictly interior point");
    }
  }

  auto barrier_grad_hess = [&](const VectorXd& v, VectorXd& grad, MatrixXd& hess) {
    grad = v - target;
    hess = MatrixXd::Identity(n, n);
    for (auto* c : input_cons) {
      const double s = c->value(x, v);
      const VectorXd g = c->input_gradient(v);
      grad += tau * (-1.0 / s) * g;
      hess += tau * (g * g.transpose() / (s * s) - c->input_hessian(n) / s);
    }
  };

  VectorXd grad(n);
  MatrixXd hess(n, n);
  for (int iter = 0; iter < 200; ++iter) {
    barrier_grad_hess(u, grad, hess);
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-10) return u;
    Eigen::LLT<MatrixXd> llt(hess);
    VectorXd dir = llt.info() == Eigen::Success
                       ? VectorXd(-llt.solve(grad))
                       : VectorXd(-grad);

    // Fraction-to-boundary: keep -s_i from shrinking past 0.5% per step.
    double alpha = 1.0;
    auto fb_ok = [&](double a) {
      VectorXd trial = u + a * dir;
      for (auto* c : input_cons)
        if (c->value(x, trial) > 0.005 * c->value(x, u)) return false;
      return true;
    };
    while (!fb_ok(alpha) && alpha > 1e-14) alpha *= 0.5;

    // Armijo on the barrier objective; skip once the predicted decrease is
    // below the round-off level of the objective itself.
    auto objective = [&](const VectorXd& v) {
      double f = 0.5 * (v - target).squaredNorm();
      for (auto* c : input_cons) f -= tau * std::log(-c->value(x, v));
      return f;
    };
    const double f0 = objective(u);
    const double slope = grad.dot(dir);
    if (-slope > 1e-13 * (1.0 + std::abs(f0))) {
      while (alpha > 1e-14 && objective(u + alpha * dir) > f0 + 1e-4 * alpha * slope)
        alpha *= 0.5;
    }
    u += alpha * dir;
  }
  raise(ErrorCode::max_iterations, "interior-point Newton did not converge");
}

BoundaryHistogram boundary_mass_histogram(
    const ConstraintSet& set, const VectorXd& x,
    const std::function<VectorXd(RngStream&)>& sampler, long n, int bins,
    RngStream& rng) {
  BoundaryHistogram out;
  out.samples = n;
  out.counts = Eigen::MatrixXi::Zero(std::max(bins, 1), std::max(bins, 1));
  if (n <= 0) {
    out.counts.resize(0, 0);
    return out;
  }

  std::vector<VectorXd> points;
  points.reserve(static_cast<std::size_t>(n));
  long on_boundary = 0;
  for (long i = 0; i < n; ++i) {
    VectorXd u = sampler(rng);
    if (u.size() != 2)
      raise(ErrorCode::dimension_mismatch, "histogram requires 2-D inputs");
    ProjectionOutcome res = project(set, x, u);
    const double worst = set.values(x, res.projected).maxCoeff();
    if (worst >= -1e-7) ++on_boundary;
    points.push_back(res.projected);
  }
  out.boundary_fraction = static_cast<double>(on_boundary) / static_cast<double>(n);

  out.u1_lo = out.u2_lo = std::numeric_limits<double>::infinity();
  out.u1_hi = out.u2_hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    out.u1_lo = std::min(out.u1_lo, p[0]);
    out.u1_hi = std::max(out.u1_hi, p[0]);
    out.u2_lo = std::min(out.u2_lo, p[1]);
    out.u2_hi = std::max(out.u2_hi, p[1]);
  }
  const double pad = 1e-9;
  const double w1 = std::max(out.u1_hi - out.u1_lo, 1e-12) + pad;
  const double w2 = std::max(out.u2_hi - out.u2_lo, 1e-12) + pad;
  for (const auto& p : points) {
    int i = static_cast<int>((p[0] - out.u1_lo) / w1 * bins);
    int j = static_cast<int>((p[1] - out.u2_lo) / w2 * bins);
    i = std::clamp(i, 0, bins - 1);
    j = std::clamp(j, 0, bins - 1);
    out.counts(i, j) += 1;
  }
  return out;
}

void write_histogram_csv(const BoundaryHistogram& hist, std::ostream& os) {
  os << "u1_bin,u2_bin,count\n";
  char line[128];
  for (int i = 0; i < hist.counts.rows(); ++i)
    for (int j = 0; j < hist.counts.cols(); ++j) {
      std::snprintf(line, sizeof(line), "%d,%d,%d\n", i, j, hist.counts(i, j));
      os << line;
    }
  std::snprintf(line, sizeof(line), "boundary_fraction=%.17g\n", hist.boundary_fraction);
  os << line;
}

}  // namespace safepg
