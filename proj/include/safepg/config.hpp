#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safepg/constraints.hpp"
#include "safepg/cost.hpp"
#include "safepg/env.hpp"
#include "safepg/policy.hpp"
#include "safepg/tube_mpc.hpp"

namespace safepg {

/// Raw key-value file with [section] headers; keys remember their line for
/// diagnostics. Lines starting with '#' or ';' are comments.
struct ParsedConfig {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, std::map<std::string, Entry>> sections;

  const Entry* find(const std::string& section, const std::string& key) const;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::filesystem::path& path);

/// Fully resolved experiment description; every field is echoed into the run
/// manifest so no silent default exists.
struct ExperimentConfig {
  PlantModel plant;
  NominalModel model;
  QuadStageCost cost;
  Eigen::VectorXd policy_input_ref0 = Eigen::Vector2d(0.4, 0.3);
  Eigen::VectorXd policy_state_ref0 = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd policy_gain0 = Eigen::MatrixXd::Zero(2, 2);
  double sigma = 0.1;
  int horizon = 10;
  double gamma = 0.9;
  TubeNorm tube_norm = TubeNorm::closed_loop_2;
  int batches = 30;
  int episode_len = 20;
  int episodes_per_batch = 10;
  int eval_episodes = 16;
  int eval_horizon = 200;
  double step_size = 0.15;
  std::uint64_t seed = 1;
  Eigen::Vector2d x0{0.0, 1.0};
  std::optional<ConstraintSet> safe_set;  // for demo / project subcommands

  GaussianPolicy initial_policy() const;
  TubeMpcConfig tube_config() const;
  std::string to_manifest(const std::string& code_version) const;
};

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Builds an ExperimentConfig from a parsed file, collecting one diagnostic
/// per offending field (with its line number) and cross-field checks such as
/// the tube feasibility precheck.
ValidationResult validate_config(const ParsedConfig& parsed);
ValidationResult validate_config_file(const std::filesystem::path& path);

/// Built-in defaults (the configuration used by the stock reproduction run).
ExperimentConfig default_experiment_config();

}  // namespace safepg
