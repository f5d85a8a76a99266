#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "safepg/constraints.hpp"
#include "safepg/opt/qp.hpp"
#include "safepg/rng.hpp"

namespace safepg {

/// Result of a Euclidean projection onto a safe set, together with the
/// first-order sensitivity data of the projection map.
struct ProjectionOutcome {
  Eigen::VectorXd projected;
  /// One multiplier per constraint of the set (zero at state-only rows).
  Eigen::VectorXd multipliers;
  /// Indices (into the set's components) of strictly active constraints.
  std::vector<int> active;
  /// Orthonormal basis of the tangent space of the strictly active rows.
  Eigen::MatrixXd nullspace;
  /// I + sum of mu_i times the constraint input-Hessians, strictly active only.
  Eigen::MatrixXd curvature;
  /// Sensitivity of the projected input w.r.t. the target; absent when the
  /// active-row Jacobian is rank deficient.
  std::optional<Eigen::MatrixXd> correction;
  double kkt_residual = 0.0;
  bool weak_activity = false;
  bool licq_ok = true;
};

/// Builds  min 1/2 u'H u + g'u  over the safe set at x. Pure state components
/// decide feasibility only; `component_of`, when given, receives the map from
/// QP constraint index to set component index.
opt::QpProblem safe_set_qp(const ConstraintSet& set, const Eigen::VectorXd& x,
                           Eigen::MatrixXd hessian, Eigen::VectorXd linear,
                           std::vector<int>* component_of);

/// Closest point of { u | s(x, u) <= 0 } to `target`. Raises
/// infeasible_safe_set when the set is empty at x.
ProjectionOutcome project(const ConstraintSet& set, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& target);

/// Chains a policy parameter Jacobian (rows = parameters) through the
/// projection: returns policy_jacobian * correction. Raises weak_activity or
/// licq_violation when the projection gradient is not defined.
Eigen::MatrixXd policy_jacobian_projected(const ProjectionOutcome& outcome,
                                          const Eigen::MatrixXd& policy_jacobian);

/// Log-barrier smoothing of the projection: minimizes
///   1/2 ||u - target||^2 - tau * sum_i log(-s_i(x, u))
/// by damped Newton with fraction-to-boundary clipping at 0.995. The result
/// approaches project(...) at rate O(tau).
Eigen::VectorXd project_interior_point(const ConstraintSet& set, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& target, double tau);

struct BoundaryHistogram {
  Eigen::MatrixXi counts;  // bins x bins, row = u1 bin
  double u1_lo = 0, u1_hi = 0, u2_lo = 0, u2_hi = 0;
  double boundary_fraction = 0.0;
  long samples = 0;
};

/// Projects `n` sampled inputs and histograms the projected points; reports
/// the fraction that lands on the safe-set boundary (within 1e-7 in
/// constraint value). Two-dimensional inputs only.
BoundaryHistogram boundary_mass_histogram(
    const ConstraintSet& set, const Eigen::VectorXd& x,
    const std::function<Eigen::VectorXd(RngStream&)>& sampler, long n, int bins,
    RngStream& rng);

void write_histogram_csv(const BoundaryHistogram& hist, std::ostream& os);

}  // namespace safepg
