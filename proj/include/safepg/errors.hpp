#pragma once

#include <stdexcept>
#include <string>

namespace safepg {

enum class ErrorCode {
  infeasible,
  max_iterations,
  rank_deficient,
  singular,
  no_convergence,
  dimension_mismatch,
  not_differentiable,
  infeasible_safe_set,
  licq_violation,
  weak_activity,
  no_interior_point,
  singular_gram,
  empty_batch,
  non_finite_gradient,
  tube_infeasible,
  unknown_demo,
  invalid_config,
  invalid_argument,
};

/// Exception carrying a machine-checkable failure code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace safepg
