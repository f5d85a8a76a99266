#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "safepg/cost.hpp"
#include "safepg/opt/qp.hpp"

namespace safepg {

/// Nominal prediction model  x+ = scale * R(angle) x + u  (B = I).
struct NominalModel {
  double angle_deg = 25.0;
  double scale = 1.1;
  Eigen::Matrix2d a_matrix() const;
};

enum class TubeNorm {
  closed_loop_2,  // ||A - K_aux||_2, contractive ball propagator (default)
  open_loop_inf,  // literal ||A||_inf reading; infeasible for long horizons
};

struct TubeMpcConfig {
  NominalModel model;
  QuadStageCost cost;
  int horizon = 10;
  double gamma = 0.9;
  double noise_bound = 0.1;  // max ||n||
  TubeNorm norm = TubeNorm::closed_loop_2;
};

/// Ball-tube data: auxiliary LQR gain, contraction value, dispersion radii
/// r_0..r_N with r_0 = 0 and r_{k+1} = contraction * r_k + noise_bound, and
/// the tightened state-constraint radii 1 - r_k.
struct TubeMpcProblem {
  NominalModel model;
  QuadStageCost cost;
  int horizon = 10;
  double gamma = 0.9;
  double noise_bound = 0.1;
  TubeNorm norm = TubeNorm::closed_loop_2;
  Eigen::Matrix2d auxiliary_gain;
  double contraction = 0.0;
  std::vector<double> radii;      // r_0..r_N
  std::vector<double> tightened;  // 1 - r_k, k = 0..N
};

/// Computes the auxiliary gain (LQR of the nominal model for Q = R = I), the
/// contraction value of the configured norm, and the radius recursion.
/// Raises tube_infeasible as soon as a tightened radius is nonpositive within
/// the horizon, and when the closed-loop norm choice is not contractive.
TubeMpcProblem build_tube(const TubeMpcConfig& config);

struct MpcSolution {
  Eigen::VectorXd stacked_inputs;                // u_0..u_{N-1}
  std::vector<Eigen::Vector2d> inputs;           // same, per stage
  std::vector<Eigen::Vector2d> nominal_states;   // x_0..x_N by the model recursion
  Eigen::VectorXd multipliers;                   // per tightened constraint k = 1..N
  std::vector<opt::Activity> activity;
  double kkt_residual = 0.0;
  bool weak_activity = false;
  Eigen::Vector2d state;                          // the x this was solved at
  Eigen::Vector2d target;                         // the u_target projected
};

/// Solves
///   min 1/2 ||u_0 - u_target||^2 + sum_{k=1}^{N-1} gamma^k L(x_k, u_k)
///   s.t. nominal dynamics, x_0 = x, ||x_k||^2 <= (1 - r_k)^2 for k = 1..N.
/// Raises infeasible when ||x|| > 1 (state outside the recoverable set).
MpcSolution solve_projection_mpc(const TubeMpcProblem& problem, const Eigen::Vector2d& x,
                                 const Eigen::Vector2d& u_target);

/// Sensitivity of the first input w.r.t. the policy parameters when
/// u_target = policy mean: chains the given parameter Jacobian through the
/// KKT sensitivity of the full horizon problem condensed onto u_0.
/// Raises weak_activity / licq_violation when the gradient is undefined.
Eigen::MatrixXd mpc_first_input_sensitivity(const TubeMpcProblem& problem,
                                            const MpcSolution& solution,
                                            const Eigen::MatrixXd& policy_jacobian);

/// Sensitivity of u_0 w.r.t. the target itself (the correction matrix of the
/// reduced projection); building block of mpc_first_input_sensitivity.
Eigen::Matrix2d mpc_target_sensitivity(const TubeMpcProblem& problem,
                                       const MpcSolution& solution);

/// Stochastic-case projection: first input of the horizon problem with the
/// drawn sample as target. The tail cost carries no policy-parameter
/// dependence, so the score-at-sample estimator applies unchanged.
Eigen::Vector2d mpc_stochastic_projection(const TubeMpcProblem& problem,
                                          const Eigen::Vector2d& x,
                                          const Eigen::Vector2d& u_sample);

}  // namespace safepg
