#pragma once

#include <Eigen/Dense>
#include <vector>

#include "safepg/errors.hpp"

namespace safepg {

enum class ConstraintKind { affine, input_ball, state_norm };

/// One scalar inequality s_i(x, u) <= 0.
struct ConstraintComponent {
  ConstraintKind kind = ConstraintKind::affine;
  // affine: row'u <= rhs
  Eigen::VectorXd row;
  double rhs = 0.0;
  // input_ball: ||u - center||^2 <= radius^2
  Eigen::VectorXd center;
  double radius = 0.0;
  // state_norm: x'x <= 1 (independent of the input)

  bool depends_on_input() const { return kind != ConstraintKind::state_norm; }
  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& u) const;
  /// Constant input Hessian of s_i (zero for affine/state kinds, 2I for balls).
  Eigen::MatrixXd input_hessian(int input_dim) const;
};

/// Flat list of scalar inequalities describing a safe input set
/// { u | s(x, u) <= 0 } plus optional pure state conditions.
class ConstraintSet {
 public:
  static ConstraintSet affine(Eigen::MatrixXd rows, Eigen::VectorXd rhs);
  static ConstraintSet input_ball(Eigen::VectorXd center, double radius);
  static ConstraintSet state_norm();
  static ConstraintSet composite(const std::vector<ConstraintSet>& parts);

  // Membership is boundary inclusive: projections land on the boundary.
  static constexpr double kMembershipTol = 1e-9;

  int size() const { return static_cast<int>(components_.size()); }
  /// Input dimension pinned by the components, or -1 when none constrains u.
  int input_dim() const { return input_dim_; }
  const std::vector<ConstraintComponent>& components() const { return components_; }

  Eigen::VectorXd values(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  bool is_member(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  /// Rows are the input gradients of each s_i (zero rows for state-only kinds).
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

 private:
  void check_input(const Eigen::VectorXd& u) const;
  std::vector<ConstraintComponent> components_;
  int input_dim_ = -1;
};

}  // namespace safepg
