#include "safepg/env.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace safepg {

using Eigen::Matrix2d;
using Eigen::Vector2d;

Matrix2d PlantModel::rotation() const {
  const double rad = angle_deg * M_PI / 180.0;
  Matrix2d r;
  r << std::cos(rad), std::sin(rad), -std::sin(rad), std::cos(rad);
  return r;
}

Vector2d sample_truncated_noise(double cov, double ball_radius, RngStream& rng) {
  const double sigma2 = cov;
  // P(R <= r) for the 2-D Gaussian radius, truncated at the ball.
  const double mass = 1.0 - std::exp(-ball_radius * ball_radius / (2.0 * sigma2));
  const double u = rng.uniform();
  const double r = std::sqrt(-2.0 * sigma2 * std::log(1.0 - u * mass));
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  return {r * std::cos(angle), r * std::sin(angle)};
}

Vector2d sample_truncated_noise_rejection(double cov, double ball_radius,
                                          RngStream& rng) {
  const double sd = std::sqrt(cov);
  for (;;) {
    Vector2d n(sd * rng.gauss(), sd * rng.gauss());
    if (n.norm() <= ball_radius) return n;
  }
}

std::pair<Vector2d, double> step(const PlantModel& plant, const QuadStageCost& cost,
                                 const Vector2d& x, const Vector2d& u, RngStream& rng) {
  Vector2d next = plant.rotation() * x + u;
  if (plant.noise_enabled)
    next += sample_truncated_noise(plant.noise_cov, plant.noise_ball, rng);
  return {next, cost.eval(x, u)};
}

std::pair<Vector2d, Vector2d> PolicyComposition::act(const Vector2d& x,
                                                     RngStream& rng) const {
  Vector2d sample = stochastic ? Vector2d(policy.sample(x, rng)) : Vector2d(policy.mean.mean(x));
  switch (safeguard) {
    case Safeguard::none:
      return {sample, sample};
    case Safeguard::set_projection: {
      if (!set) raise(ErrorCode::invalid_argument, "set projection without a set");
      return {sample, Vector2d(project(*set, x, sample).projected)};
    }
    case Safeguard::mpc_projection: {
      if (!mpc) raise(ErrorCode::invalid_argument, "mpc projection without a problem");
      return {sample, mpc_stochastic_projection(*mpc, x, sample)};
    }
  }
  raise(ErrorCode::invalid_argument, "unknown safeguard");
}

std::vector<Transition> rollout(const PlantModel& plant, const QuadStageCost& cost,
                                const PolicyComposition& comp, const Vector2d& x0,
                                int length, RngStream& rng, int episode_index) {
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(std::max(length, 0)));
  Vector2d x = x0;
  for (int t = 0; t < length; ++t) {
    auto [sample, applied] = comp.act(x, rng);
    auto [next, stage_cost] = step(plant, cost, x, applied, rng);
    out.push_back({x, sample, applied, stage_cost, next, episode_index, t});
    x = next;
  }
  return out;
}

ReturnEstimate evaluate_return(const PlantModel& plant, const QuadStageCost& cost,
                               const PolicyComposition& comp, const Vector2d& x0,
                               double gamma, int horizon, int episodes,
                               std::uint64_t seed) {
  ReturnEstimate out;
  out.episodes = episodes;
  if (episodes <= 0) return out;
  std::vector<double> returns(static_cast<std::size_t>(episodes), 0.0);
  double max_cost = 0.0;
  for (int e = 0; e < episodes; ++e) {
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(e));
    Vector2d x = x0;
    double discount = 1.0;
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
      auto [sample, applied] = comp.act(x, rng);
      auto [next, stage_cost] = step(plant, cost, x, applied, rng);
      total += discount * stage_cost;
      discount *= gamma;
      max_cost = std::max(max_cost, stage_cost);
      x = next;
    }
    returns[static_cast<std::size_t>(e)] = total;
  }
  for (double r : returns) out.mean += r;
  out.mean /= episodes;
  if (episodes > 1) {
    double ss = 0.0;
    for (double r : returns) ss += (r - out.mean) * (r - out.mean);
    out.std_error = std::sqrt(ss / (static_cast<double>(episodes) *
                                    (static_cast<double>(episodes) - 1.0)));
  }
  out.tail_bound = gamma < 1.0
                       ? std::pow(gamma, horizon) * max_cost / (1.0 - gamma)
                       : std::numeric_limits<double>::infinity();
  return out;
}

void write_transitions_csv(const std::vector<Transition>& transitions, std::ostream& os) {
  os << "episode,t,x1,x2,us1,us2,u1,u2,cost,x1next,x2next\n";
  char line[360];
  for (const auto& tr : transitions) {
    std::snprintf(line, sizeof(line),
                  "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  tr.episode, tr.t, tr.x[0], tr.x[1], tr.u_sample[0], tr.u_sample[1],
                  tr.u[0], tr.u[1], tr.cost, tr.x_next[0], tr.x_next[1]);
    os << line;
  }
}

}  // namespace safepg
