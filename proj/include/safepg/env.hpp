#pragma once

#include <Eigen/Dense>
#include <vector>

#include "safepg/constraints.hpp"
#include "safepg/cost.hpp"
#include "safepg/policy.hpp"
#include "safepg/projection.hpp"
#include "safepg/rng.hpp"
#include "safepg/tube_mpc.hpp"

namespace safepg {

/// Ground-truth plant  x+ = R(angle) x + u + n  with n drawn from a centred
/// normal of covariance noise_cov * I truncated to ||n|| <= noise_ball.
struct PlantModel {
  double angle_deg = 20.0;
  double noise_cov = 0.1;
  double noise_ball = 0.1;
  bool noise_enabled = true;
  Eigen::Matrix2d rotation() const;
};

struct Transition {
  Eigen::Vector2d x;
  Eigen::Vector2d u_sample;  // unprojected sample (or the mean when deterministic)
  Eigen::Vector2d u;         // input applied to the plant
  double cost = 0.0;
  Eigen::Vector2d x_next;
  int episode = 0;
  int t = 0;
};

/// Exact 2-D truncated-normal draw: radius by inverse CDF of the truncated
/// Rayleigh, angle uniform.
Eigen::Vector2d sample_truncated_noise(double cov, double ball_radius, RngStream& rng);
/// Rejection sampler kept as a distribution cross-check.
Eigen::Vector2d sample_truncated_noise_rejection(double cov, double ball_radius,
                                                 RngStream& rng);

std::pair<Eigen::Vector2d, double> step(const PlantModel& plant, const QuadStageCost& cost,
                                        const Eigen::Vector2d& x, const Eigen::Vector2d& u,
                                        RngStream& rng);

enum class Safeguard { none, set_projection, mpc_projection };

/// A policy with an optional safety layer between sample and plant.
struct PolicyComposition {
  GaussianPolicy policy;
  bool stochastic = true;
  Safeguard safeguard = Safeguard::none;
  const ConstraintSet* set = nullptr;       // for set_projection
  const TubeMpcProblem* mpc = nullptr;      // for mpc_projection

  /// Returns (sample-or-mean, applied input).
  std::pair<Eigen::Vector2d, Eigen::Vector2d> act(const Eigen::Vector2d& x,
                                                  RngStream& rng) const;
};

std::vector<Transition> rollout(const PlantModel& plant, const QuadStageCost& cost,
                                const PolicyComposition& comp, const Eigen::Vector2d& x0,
                                int length, RngStream& rng, int episode_index = 0);

struct ReturnEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double tail_bound = 0.0;  // gamma^T * max observed stage cost / (1 - gamma)
  int episodes = 0;
};

/// Monte-Carlo estimate of the discounted return, truncated at `horizon`
/// steps, over independent episode streams derived from (seed, episode).
ReturnEstimate evaluate_return(const PlantModel& plant, const QuadStageCost& cost,
                               const PolicyComposition& comp, const Eigen::Vector2d& x0,
                               double gamma, int horizon, int episodes,
                               std::uint64_t seed);

void write_transitions_csv(const std::vector<Transition>& transitions, std::ostream& os);

}  // namespace safepg
