#pragma once

#include <Eigen/Dense>

namespace safepg {

/// Stage cost  w_x ||x - x_ref||^2 + w_u ||u - u_ref||^2 + constant.
struct QuadStageCost {
  Eigen::VectorXd x_ref = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd u_ref = Eigen::VectorXd::Zero(2);
  double w_x = 1e-2;
  double w_u = 1.0;
  double constant = 0.0;

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return w_x * (x - x_ref).squaredNorm() + w_u * (u - u_ref).squaredNorm() + constant;
  }
  Eigen::VectorXd grad_x(const Eigen::VectorXd& x) const {
    return 2.0 * w_x * (x - x_ref);
  }
  Eigen::VectorXd grad_u(const Eigen::VectorXd& u) const {
    return 2.0 * w_u * (u - u_ref);
  }
};

}  // namespace safepg
