#pragma once

#include <Eigen/Dense>
#include <span>

#include "safepg/constraints.hpp"
#include "safepg/projection.hpp"
#include "safepg/rng.hpp"

namespace safepg {

/// Action-value model, quadratic in the joint (x, u) monomial basis, so the
/// per-state slice in u is a quadratic form with constant curvature.
struct QuadraticQ {
  Eigen::VectorXd weights;  // over quadratic_features of (x; u)
  int state_dim = 0;
  int input_dim = 0;

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  /// Hessian of value w.r.t. u (constant in x for this basis).
  Eigen::MatrixXd input_curvature() const;
  /// Gradient of value w.r.t. u at u = 0, as a function of the state.
  Eigen::VectorXd input_linear_term(const Eigen::VectorXd& x) const;

  /// Builds a state-independent model value(u) = 1/2 u'H u + g'u + c.
  static QuadraticQ from_input_quadratic(const Eigen::MatrixXd& hessian,
                                         const Eigen::VectorXd& linear, double constant,
                                         int state_dim);
};

struct QTransition {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  double cost = 0.0;
  Eigen::VectorXd x_next;
  Eigen::VectorXd u_next;
};

/// argmin_u Q(x, u) subject to u in the safe set (direct constrained
/// extraction). Raises invalid_argument when the fitted curvature is not
/// positive definite (eigenvalues below 1e-9).
Eigen::VectorXd extract_safe_policy(const QuadraticQ& q, const ConstraintSet& set,
                                    const Eigen::VectorXd& x);

/// Unconstrained argmin of Q(x, .) followed by Euclidean projection onto the
/// safe set; the two-step construction whose optimality gap the safe
/// extraction closes.
Eigen::VectorXd extract_projected_policy(const QuadraticQ& q, const ConstraintSet& set,
                                         const Eigen::VectorXd& x);

/// SARSA-style LSTDQ over safe transitions.
QuadraticQ fit_q_lstdq(std::span<const QTransition> batch, double gamma);

/// Uniform rejection sampling of a safe input inside an axis-aligned box.
Eigen::VectorXd sample_safe_uniform(const ConstraintSet& set, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    RngStream& rng, int max_tries = 10000);

}  // namespace safepg
