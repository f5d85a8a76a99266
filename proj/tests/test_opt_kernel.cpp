#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "safepg/opt/dare.hpp"
#include "safepg/opt/linear_solve.hpp"
#include "safepg/opt/nullspace.hpp"
#include "safepg/opt/qp.hpp"
#include "safepg/rng.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using namespace safepg;
using namespace safepg::opt;

namespace {

QpProblem projection_problem(const VectorXd& target) {
  QpProblem p;
  const int n = static_cast<int>(target.size());
  p.hessian = MatrixXd::Identity(n, n);
  p.linear = -target;
  p.ineq_jacobian.resize(0, n);
  p.ineq_rhs.resize(0);
  return p;
}

double qp_cost(const QpProblem& p, const VectorXd& u) {
  return 0.5 * u.dot(p.hessian * u) + p.linear.dot(u);
}

void check_kkt_invariants(const QpProblem& p, const KktSolution& sol) {
  CHECK(sol.kkt_residual <= 1e-8);
  // stationarity
  VectorXd stat = p.hessian * sol.primal + p.linear;
  for (int i = 0; i < p.num_constraints(); ++i)
    stat += sol.multipliers[i] * p.constraint_gradient(i, sol.primal);
  CHECK(stat.lpNorm<Eigen::Infinity>() <= 1e-8);
  for (int i = 0; i < p.num_constraints(); ++i) {
    CHECK(sol.constraint_values[i] <= 1e-8);
    CHECK(std::abs(sol.multipliers[i] * sol.constraint_values[i]) <= 1e-8);
    CHECK(sol.multipliers[i] >= -1e-10);
  }
}

}  // namespace

TEST_CASE("solve_qp: halfspace projection hits the hand KKT point") {
  QpProblem p = projection_problem(Vector2d(2, 0));
  p.ineq_jacobian = MatrixXd::Ones(1, 2);
  p.ineq_rhs = VectorXd::Zero(1);
  KktSolution sol = solve_qp(p, Vector2d(2, 0));
  CHECK(sol.primal.isApprox(Vector2d(1, -1), 1e-9));
  CHECK(sol.multipliers[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.activity[0] == Activity::strictly_active);
  check_kkt_invariants(p, sol);
}

TEST_CASE("solve_qp: interior target of the unit ball is returned unchanged") {
  QpProblem p = projection_problem(Vector2d(0.1, 0.2));
  p.quadratic.push_back({MatrixXd::Identity(2, 2), VectorXd::Zero(2), -1.0});
  KktSolution sol = solve_qp(p, Vector2d(0.1, 0.2));
  CHECK(sol.primal.isApprox(Vector2d(0.1, 0.2), 1e-10));
  CHECK(sol.multipliers[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(sol.activity[0] == Activity::inactive);
  check_kkt_invariants(p, sol);
}

TEST_CASE("solve_qp: ball projection of an outside target") {
  QpProblem p = projection_problem(Vector2d(2, 0));
  p.quadratic.push_back({MatrixXd::Identity(2, 2), VectorXd::Zero(2), -1.0});
  KktSolution sol = solve_qp(p, Vector2d(2, 0));
  CHECK(sol.primal.isApprox(Vector2d(1, 0), 1e-8));
  CHECK(sol.multipliers[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(sol.activity[0] == Activity::strictly_active);
  check_kkt_invariants(p, sol);
}

TEST_CASE("solve_qp: infeasible affine rows are detected") {
  QpProblem p = projection_problem(VectorXd::Zero(1));
  p.ineq_jacobian.resize(2, 1);
  p.ineq_jacobian << 1, -1;
  p.ineq_rhs.resize(2);
  p.ineq_rhs << -1, -1;
  CHECK_THROWS_WITH_AS(solve_qp(p, VectorXd::Zero(1)), doctest::Contains("tolerance"),
                       Error);
  try {
    solve_qp(p, VectorXd::Zero(1));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::infeasible);
  }
}

TEST_CASE("solve_qp: random affine instances match active-set enumeration") {
  RngStream rng(42);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5);  // 2..6
    const int m = 1 + static_cast<int>(rng.uniform() * 4);  // 1..4
    QpProblem p;
    p.hessian = MatrixXd::Identity(n, n);
    VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = rng.uniform(-2, 2);
    p.linear = -target;
    p.ineq_jacobian.resize(m, n);
    p.ineq_rhs.resize(m);
    VectorXd interior(n);
    for (int i = 0; i < n; ++i) interior[i] = rng.uniform(-0.5, 0.5);
    for (int i = 0; i < m; ++i) {
      VectorXd row(n);
      for (int j = 0; j < n; ++j) row[j] = rng.uniform(-1, 1);
      row.normalize();
      p.ineq_jacobian.row(i) = row;
      p.ineq_rhs[i] = row.dot(interior) + rng.uniform(0.05, 1.0);
    }
    KktSolution sol = solve_qp(p, target);
    check_kkt_invariants(p, sol);
    auto ref = oracles::brute_force_qp(p);
    REQUIRE(ref.has_value());
    CHECK((sol.primal - *ref).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(qp_cost(p, sol.primal) <= qp_cost(p, *ref) + 1e-10);
  }
}

TEST_CASE("solve_qp: mixed ball and halfspace agrees with enumeration") {
  RngStream rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3);
    QpProblem p;
    p.hessian = MatrixXd::Identity(n, n);
    VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = rng.uniform(-2.5, 2.5);
    p.linear = -target;
    p.ineq_jacobian.resize(1, n);
    VectorXd row(n);
    for (int j = 0; j < n; ++j) row[j] = rng.uniform(-1, 1);
    row.normalize();
    p.ineq_jacobian.row(0) = row;
    p.ineq_rhs = VectorXd::Constant(1, rng.uniform(0.1, 0.8));
    p.quadratic.push_back({MatrixXd::Identity(n, n), VectorXd::Zero(n), -1.0});
    KktSolution sol = solve_qp(p, target);
    check_kkt_invariants(p, sol);
    auto ref = oracles::brute_force_qp(p);
    REQUIRE(ref.has_value());
    CHECK((sol.primal - *ref).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}

TEST_CASE("nullspace_orthonormal: single row, empty and square cases") {
  MatrixXd j(1, 2);
  j << 1, 1;
  MatrixXd n1 = nullspace_orthonormal(j);
  REQUIRE(n1.cols() == 1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(n1(0, 0)) - inv_sqrt2) <= 1e-12);
  CHECK(std::abs(n1(0, 0) + n1(1, 0)) <= 1e-12);  // orthogonal to (1, 1)

  MatrixXd empty(0, 2);
  CHECK(nullspace_orthonormal(empty).isApprox(MatrixXd::Identity(2, 2)));

  CHECK(nullspace_orthonormal(MatrixXd::Identity(2, 2)).cols() == 0);
}

TEST_CASE("nullspace_orthonormal: defining equations on random jacobians") {
  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform() * 5);
    const int rows = static_cast<int>(rng.uniform() * m);
    MatrixXd j(rows, m);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < m; ++k) j(i, k) = rng.gauss();
    MatrixXd n = nullspace_orthonormal(j);
    CHECK(n.cols() == m - rows);
    if (rows > 0) CHECK((j * n).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((n.transpose() * n - MatrixXd::Identity(n.cols(), n.cols()))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("nullspace_orthonormal: dependent rows raise rank_deficient") {
  MatrixXd j(2, 2);
  j << 1, 1, 2, 2;
  CHECK_THROWS_AS(nullspace_orthonormal(j), Error);
}

TEST_CASE("solve_dare: zero dynamics need no feedback") {
  MatrixXd zero2 = MatrixXd::Zero(2, 2);
  MatrixXd eye2 = MatrixXd::Identity(2, 2);
  DareSolution sol = solve_dare(zero2, eye2, eye2, eye2);
  CHECK(sol.gain.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("solve_dare: scalar case matches the quadratic formula") {
  const double a = 0.5, b = 1.0, q = 1.0, r = 1.0;
  MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
  A << a;
  B << b;
  Q << q;
  R << r;
  DareSolution sol = solve_dare(A, B, Q, R);
  // p solves p = q + a^2 p - a^2 b^2 p^2 / (r + b^2 p), i.e.
  // p^2 - (q + a^2 r ... ) reduce numerically:
  const double p = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;  // p^2 - 0.25 p - 1 = 0
  const double k = a * b * p / (r + b * b * p);
  CHECK(sol.cost_to_go(0, 0) == doctest::Approx(p).epsilon(1e-10));
  CHECK(sol.gain(0, 0) == doctest::Approx(k).epsilon(1e-10));
  CHECK(sol.residual <= 1e-10);
}

TEST_CASE("solve_dare: scaled rotation yields a contractive closed loop") {
  const double rad = 25.0 * M_PI / 180.0;
  MatrixXd A(2, 2);
  A << std::cos(rad), std::sin(rad), -std::sin(rad), std::cos(rad);
  A *= 1.1;
  MatrixXd eye2 = MatrixXd::Identity(2, 2);
  DareSolution sol = solve_dare(A, eye2, eye2, eye2);
  CHECK(sol.residual <= 1e-10);
  MatrixXd closed = A - sol.gain;
  CHECK(spectral_radius(closed) < 1.0);
  Eigen::JacobiSVD<MatrixXd> svd(closed);
  CHECK(svd.singularValues()(0) < 1.0);
  MESSAGE("||A - K||_2 = ", svd.singularValues()(0));
}

TEST_CASE("linear_solve: identity, diagonal, SPD residual, singular") {
  VectorXd b(2);
  b << 3, -1;
  CHECK(linear_solve(MatrixXd::Identity(2, 2), b).isApprox(b));

  MatrixXd d(2, 2);
  d << 2, 0, 0, 4;
  VectorXd rhs(2);
  rhs << 2, 8;
  VectorXd expect(2);
  expect << 1, 2;
  CHECK(linear_solve(d, rhs).isApprox(expect, 1e-12));

  RngStream rng(5);
  MatrixXd m(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) m(i, j) = rng.gauss();
  MatrixXd spd = m * m.transpose() + MatrixXd::Identity(8, 8);
  VectorXd b8(8);
  for (int i = 0; i < 8; ++i) b8[i] = rng.gauss();
  double rcond = 0.0;
  VectorXd x = linear_solve(spd, b8, &rcond);
  CHECK((spd * x - b8).lpNorm<Eigen::Infinity>() <=
        1e-10 * (1.0 + b8.lpNorm<Eigen::Infinity>()));
  CHECK(rcond > 0.0);

  MatrixXd sing = MatrixXd::Zero(2, 2);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(linear_solve(sing, b), Error);
}
