#include "safepg/constraints.hpp"

namespace safepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ConstraintComponent::value(const VectorXd& x, const VectorXd& u) const {
  switch (kind) {
    case ConstraintKind::affine:
      return row.dot(u) - rhs;
    case ConstraintKind::input_ball:
      return (u - center).squaredNorm() - radius * radius;
    case ConstraintKind::state_norm:
      return x.squaredNorm() - 1.0;
  }
  raise(ErrorCode::invalid_argument, "unknown constraint kind");
}

VectorXd ConstraintComponent::input_gradient(const VectorXd& u) const {
  switch (kind) {
    case ConstraintKind::affine:
      return row;
    case ConstraintKind::input_ball:
      return 2.0 * (u - center);
    case ConstraintKind::state_norm:
      return VectorXd::Zero(u.size());
  }
  raise(ErrorCode::invalid_argument, "unknown constraint kind");
}

MatrixXd ConstraintComponent::input_hessian(int input_dim) const {
  if (kind == ConstraintKind::input_ball)
    return 2.0 * MatrixXd::Identity(input_dim, input_dim);
  return MatrixXd::Zero(input_dim, input_dim);
}

ConstraintSet ConstraintSet::affine(MatrixXd rows, VectorXd rhs) {
  if (rows.rows() != rhs.size())
    raise(ErrorCode::dimension_mismatch, "affine rows and rhs sizes disagree");
  ConstraintSet set;
  set.input_dim_ = static_cast<int>(rows.cols());
  for (int i = 0; i < rows.rows(); ++i) {
    ConstraintComponent c;
    c.kind = ConstraintKind::affine;
    c.row = rows.row(i).transpose();
    c.rhs = rhs[i];
    set.components_.push_back(std::move(c));
  }
  return set;
}

ConstraintSet ConstraintSet::input_ball(VectorXd center, double radius) {
  if (radius <= 0.0) raise(ErrorCode::invalid_argument, "ball radius must be positive");
  ConstraintSet set;
  set.input_dim_ = static_cast<int>(center.size());
  ConstraintComponent c;
  c.kind = ConstraintKind::input_ball;
  c.center = std::move(center);
  c.radius = radius;
  set.components_.push_back(std::move(c));
  return set;
}

ConstraintSet ConstraintSet::state_norm() {
  ConstraintSet set;
  ConstraintComponent c;
  c.kind = ConstraintKind::state_norm;
  set.components_.push_back(std::move(c));
  return set;
}

ConstraintSet ConstraintSet::composite(const std::vector<ConstraintSet>& parts) {
  ConstraintSet set;
  for (const auto& part : parts) {
    if (part.input_dim_ >= 0) {
      if (set.input_dim_ >= 0 && set.input_dim_ != part.input_dim_)
        raise(ErrorCode::dimension_mismatch, "composite parts disagree on input dimension");
      set.input_dim_ = part.input_dim_;
    }
    for (const auto& c : part.components_) set.components_.push_back(c);
  }
  return set;
}

void ConstraintSet::check_input(const VectorXd& u) const {
  if (input_dim_ >= 0 && u.size() != input_dim_)
    raise(ErrorCode::dimension_mismatch, "input dimension does not match the constraint set");
}

VectorXd ConstraintSet::values(const VectorXd& x, const VectorXd& u) const {
  check_input(u);
  VectorXd out(size());
  for (int i = 0; i < size(); ++i) out[i] = components_[i].value(x, u);
  return out;
}

bool ConstraintSet::is_member(const VectorXd& x, const VectorXd& u) const {
  check_input(u);
  for (const auto& c : components_)
    if (c.value(x, u) > kMembershipTol) return false;
  return true;
}

MatrixXd ConstraintSet::input_jacobian(const VectorXd& x, const VectorXd& u) const {
  check_input(u);
  (void)x;
  MatrixXd jac(size(), u.size());
  for (int i = 0; i < size(); ++i) jac.row(i) = components_[i].input_gradient(u).transpose();
  return jac;
}

}  // namespace safepg
