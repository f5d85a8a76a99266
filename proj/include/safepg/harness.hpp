#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "safepg/config.hpp"
#include "safepg/policy_gradient.hpp"

namespace safepg {

inline constexpr const char* kCodeVersion = "safepg 0.1.0";

struct RunLogRow {
  int batch = 0;              // 1-based
  Eigen::VectorXd theta;      // parameters after this batch's update
  double grad_norm = 0.0;
  double j_mean = 0.0;
  double j_se = 0.0;
  double j_norm = 0.0;        // j_mean / J(theta_0)
  long safety_violations = 0;
  long dropped = 0;
};

struct RunResult {
  std::vector<RunLogRow> rows;
  double j_initial = 0.0;
  long total_safety_violations = 0;
  std::filesystem::path out_dir;
  std::filesystem::path manifest_path;
  std::filesystem::path runlog_path;
  std::filesystem::path traj_first_path;
  std::filesystem::path traj_last_path;
};

/// The end-to-end learning study: per batch, roll out the stochastic policy
/// through the tube-MPC projection, fit the value and compatible-advantage
/// critics, take one corrected policy-gradient step, and evaluate the
/// discounted return on a fixed set of evaluation noise streams (common
/// random numbers across batches). Emits manifest, run log, and first/last
/// trajectory CSVs into `out_dir`; any solver error aborts with the batch
/// index in the message.
RunResult run_section5(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Deterministic-gradient bias study on a noise-free plant with an always
/// active halfspace constraint. The reference is a central finite difference
/// of the truncated closed-loop return; the corrected and naive estimates are
/// assembled from per-step projection outcomes and an exact adjoint sweep.
struct DetBiasStudy {
  Eigen::VectorXd fd_gradient;
  Eigen::VectorXd corrected;
  Eigen::VectorXd naive;
  double corrected_rel_err = 0.0;  // max-norm relative error vs FD
  double naive_angle_deg = 0.0;    // angle between naive and FD
  int active_steps = 0;
  int total_steps = 0;
  int dropped = 0;
};
DetBiasStudy det_bias_study();

/// Stochastic-gradient bias study on the one-step clipping problem
/// u = min(u_sample, 1) with cost (u - 1/2)^2. The reference gradient is
/// computed by quadrature of the truncated integrand.
struct StochBiasStudy {
  double oracle_gradient = 0.0;
  double corrected_mean = 0.0;
  double corrected_se = 0.0;
  double naive_mean = 0.0;
  double naive_se = 0.0;
  double mass_beyond = 0.0;  // P(u_sample > 1)
  long samples = 0;
};
StochBiasStudy stoch_bias_study(double theta, double sigma, long samples,
                                std::uint64_t seed);

/// Demonstration artifacts; `name` is one of fig1, fig2, bias-det,
/// bias-stoch. Returns the paths written. Raises unknown_demo otherwise.
std::vector<std::filesystem::path> run_demo(const std::string& name,
                                            const ExperimentConfig& cfg,
                                            const std::filesystem::path& out_dir);

}  // namespace safepg
