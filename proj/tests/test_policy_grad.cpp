#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "safepg/policy_gradient.hpp"
#include "safepg/rng.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using namespace safepg;

namespace {

GaussianPolicy policy_2d(double sigma = 0.2) {
  GaussianPolicy p;
  p.mean = AffinePolicy::zero(2, 2);
  p.mean.input_ref = Vector2d(0.4, -0.1);
  p.mean.gain << 0.5, 0.1, -0.2, 0.3;
  p.mean.state_ref = Vector2d(0.1, 0.0);
  p.sigma = sigma;
  return p;
}

// 1-D clipping problem u = min(theta, 1): policy mean = input_ref at x = 0.
ConstraintSet upper_bound_1d() {
  return ConstraintSet::affine(MatrixXd::Ones(1, 1), VectorXd::Ones(1));
}

}  // namespace

TEST_CASE("affine policy: parameter jacobian matches finite differences") {
  AffinePolicy p = policy_2d().mean;
  Vector2d x(0.7, -0.4);
  MatrixXd jac = p.mean_param_jacobian(x);
  for (int coord = 0; coord < 2; ++coord) {
    VectorXd fd = oracles::fd_gradient(
        [&](const VectorXd& theta) {
          return AffinePolicy::from_params(theta, 2, 2).mean(x)[coord];
        },
        p.params(), 1e-6);
    CHECK((jac.col(coord) - fd).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
  // round trip
  AffinePolicy back = AffinePolicy::from_params(p.params(), 2, 2);
  CHECK(back.gain.isApprox(p.gain));
  CHECK(back.input_ref.isApprox(p.input_ref));
}

TEST_CASE("gaussian policy: score matches finite differences of the log density") {
  GaussianPolicy p = policy_2d(0.3);
  RngStream rng(1);
  Vector2d x(0.2, 0.5);
  VectorXd u = p.sample(x, rng);
  VectorXd score = p.score(x, u);
  VectorXd fd = oracles::fd_gradient(
      [&](const VectorXd& theta) {
        GaussianPolicy q = p;
        q.mean = AffinePolicy::from_params(theta, 2, 2);
        return q.log_density(x, u);
      },
      p.mean.params(), 1e-6);
  CHECK((score - fd).lpNorm<Eigen::Infinity>() <= 1e-6);

  // zero at the mean, odd in the deviation
  CHECK(p.score(x, p.mean.mean(x)).lpNorm<Eigen::Infinity>() <= 1e-14);
  Vector2d dev(0.1, -0.3);
  VectorXd splus = p.score(x, p.mean.mean(x) + dev);
  VectorXd sminus = p.score(x, p.mean.mean(x) - dev);
  CHECK((splus + sminus).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("gaussian policy: sampling moments and determinism") {
  GaussianPolicy p = policy_2d(0.25);
  Vector2d x(0.1, 0.9);
  const int n = 100000;
  RngStream rng(77);
  Vector2d sum = Vector2d::Zero();
  for (int i = 0; i < n; ++i) sum += Vector2d(p.sample(x, rng));
  Vector2d mean = sum / n;
  const double se = p.sigma / std::sqrt(static_cast<double>(n));
  CHECK((mean - Vector2d(p.mean.mean(x))).lpNorm<Eigen::Infinity>() <= 4.0 * se);

  RngStream a(123), b(123);
  CHECK(p.sample(x, a).isApprox(p.sample(x, b)));

  GaussianPolicy tight = p;
  tight.sigma = 1e-14;
  RngStream c(5);
  CHECK((tight.sample(x, c) - p.mean.mean(x)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("deterministic gradient: 1-D clipping has the piecewise closed form") {
  ConstraintSet bound = upper_bound_1d();
  auto advantage_grad = [](double u) { return 2.0 * (u - 3.0); };  // A(u) = (u-3)^2

  auto estimate_at = [&](double theta0, bool corrected) {
    AffinePolicy pol = AffinePolicy::zero(1, 1);
    pol.input_ref = VectorXd::Constant(1, theta0);
    VectorXd x = VectorXd::Zero(1);
    ProjectionOutcome outcome = project(bound, x, pol.mean(x));
    std::vector<DetGradSample> batch = {
        {x, outcome, VectorXd::Constant(1, advantage_grad(outcome.projected[0]))}};
    return corrected ? det_policy_gradient_corrected(pol, batch)
                     : det_policy_gradient_naive(pol, batch);
  };

  // inactive branch: both estimators equal A'(theta)
  GradientEstimate below_c = estimate_at(0.5, true);
  GradientEstimate below_n = estimate_at(0.5, false);
  CHECK(below_c.gradient[0] == doctest::Approx(advantage_grad(0.5)));
  CHECK(below_c.gradient.isApprox(below_n.gradient));

  // clipped branch: corrected is zero, naive keeps the (wrong) A'(1)
  GradientEstimate above_c = estimate_at(1.5, true);
  GradientEstimate above_n = estimate_at(1.5, false);
  CHECK(above_c.gradient.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(above_n.gradient[0] == doctest::Approx(advantage_grad(1.0)));
}

TEST_CASE("deterministic gradient: mixed batch decomposition and permutation") {
  ConstraintSet bound = upper_bound_1d();
  AffinePolicy pol = AffinePolicy::zero(1, 1);
  pol.input_ref = VectorXd::Constant(1, 0.8);
  RngStream rng(3);
  std::vector<DetGradSample> batch;
  double manual_sum_diff = 0.0;
  for (int i = 0; i < 40; ++i) {
    VectorXd x = VectorXd::Constant(1, rng.uniform(-2, 2));
    pol.gain(0, 0) = -0.5;  // mean = 0.8 + 0.5 x, active for x > 0.4
    ProjectionOutcome outcome = project(bound, x, pol.mean(x));
    VectorXd ga = VectorXd::Constant(1, rng.uniform(-2, 2));
    batch.push_back({x, outcome, ga});
    if (!outcome.active.empty())
      manual_sum_diff += (pol.mean_param_jacobian(x) * ga)(0);
  }
  GradientEstimate corrected = det_policy_gradient_corrected(pol, batch);
  GradientEstimate naive = det_policy_gradient_naive(pol, batch);
  const double n = static_cast<double>(corrected.sample_count);
  // the two estimators differ exactly by the active samples' uncorrected terms
  CHECK(naive.gradient[0] - corrected.gradient[0] ==
        doctest::Approx(manual_sum_diff / n).epsilon(1e-9));

  std::vector<DetGradSample> shuffled = batch;
  std::reverse(shuffled.begin(), shuffled.end());
  GradientEstimate again = det_policy_gradient_corrected(pol, shuffled);
  CHECK((again.gradient - corrected.gradient).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("stochastic gradient: trivial cases") {
  GaussianPolicy pol = policy_2d(0.3);
  RngStream rng(4);
  ConstraintSet ball = ConstraintSet::input_ball(Vector2d::Zero(), 5.0);
  std::vector<StochGradSample> inactive;
  std::vector<StochGradSample> zero_adv;
  for (int i = 0; i < 30; ++i) {
    Vector2d x(rng.gauss(), rng.gauss());
    VectorXd us = pol.sample(x, rng);
    VectorXd up = project(ball, x, us).projected;  // never active: radius 5
    inactive.push_back({x, us, up, rng.uniform(-1, 1)});
    zero_adv.push_back({x, us, up, 0.0});
  }
  GradientEstimate corr = stoch_policy_gradient_corrected(pol, inactive);
  GradientEstimate naive = stoch_policy_gradient_naive(pol, inactive);
  CHECK((corr.gradient - naive.gradient).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(stoch_policy_gradient_corrected(pol, zero_adv).gradient.lpNorm<Eigen::Infinity>() ==
        0.0);
}

TEST_CASE("stochastic gradient: samples collapsed onto one boundary point") {
  // far-out samples all project to the same corner of a tiny box
  MatrixXd g(2, 2);
  g << 1, 0, 0, 1;
  ConstraintSet box = ConstraintSet::affine(g, Vector2d(-1, -1));
  GaussianPolicy pol = policy_2d(0.2);
  RngStream rng(6);
  std::vector<StochGradSample> batch;
  Vector2d x(0, 0);
  for (int i = 0; i < 20; ++i) {
    VectorXd us = Vector2d(2.0 + 0.1 * rng.gauss(), 2.0 + 0.1 * rng.gauss());
    VectorXd up = project(box, x, us).projected;
    CHECK((up - Vector2d(-1, -1)).norm() <= 1e-9);
    batch.push_back({x, us, up, 1.0});
  }
  // naive scores are identical across the batch (degenerate concentration)
  GradientEstimate naive = stoch_policy_gradient_naive(pol, batch);
  CHECK(naive.standard_error.lpNorm<Eigen::Infinity>() <= 1e-12);
  GradientEstimate corr = stoch_policy_gradient_corrected(pol, batch);
  CHECK(corr.standard_error.lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("ascend: fixed points, scaling, composition, finiteness") {
  VectorXd theta = VectorXd::LinSpaced(5, -1, 1);
  GradientEstimate zero;
  zero.gradient = VectorXd::Zero(5);
  CHECK(ascend(theta, zero, 0.1).isApprox(theta));

  GradientEstimate g;
  g.gradient = VectorXd::Ones(5);
  CHECK((ascend(theta, g, 0.2) - (theta - 0.2 * VectorXd::Ones(5))).norm() <= 1e-15);
  VectorXd two_steps = ascend(ascend(theta, g, 0.1), g, 0.1);
  CHECK((two_steps - ascend(theta, g, 0.2)).norm() <= 1e-15);

  GradientEstimate bad;
  bad.gradient = VectorXd::Constant(5, std::nan(""));
  CHECK_THROWS_AS(ascend(theta, bad, 0.1), Error);
  CHECK_THROWS_AS(ascend(theta, g, 0.0), Error);
}

TEST_CASE("empty batches are rejected") {
  GaussianPolicy pol = policy_2d();
  std::vector<StochGradSample> empty;
  CHECK_THROWS_AS(stoch_policy_gradient_corrected(pol, empty), Error);
  std::vector<DetGradSample> dempty;
  CHECK_THROWS_AS(det_policy_gradient_corrected(pol.mean, dempty), Error);
}
