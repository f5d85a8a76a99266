#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "safepg/env.hpp"
#include "safepg/harness.hpp"

using namespace safepg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg = default_experiment_config();
  cfg.batches = 3;
  cfg.episodes_per_batch = 2;
  cfg.episode_len = 10;
  cfg.eval_episodes = 2;
  cfg.eval_horizon = 30;
  cfg.horizon = 5;
  cfg.seed = 42;
  return cfg;
}

const char* kValidText = R"(
[policy]
sigma = 0.1

[learn]
batches = 2
)";

}  // namespace

TEST_CASE("validate_config: missing sigma and negative horizon are named") {
  ParsedConfig no_sigma = parse_config_text("[learn]\nbatches = 2\n");
  ValidationResult v1 = validate_config(no_sigma);
  REQUIRE_FALSE(v1.ok());
  bool mentions_sigma = false;
  for (const auto& e : v1.errors) mentions_sigma |= e.find("sigma") != std::string::npos;
  CHECK(mentions_sigma);

  ParsedConfig bad_n = parse_config_text("[policy]\nsigma = 0.1\n[mpc]\nhorizon = -3\n");
  ValidationResult v2 = validate_config(bad_n);
  REQUIRE_FALSE(v2.ok());
  bool mentions_horizon = false;
  for (const auto& e : v2.errors) mentions_horizon |= e.find("horizon") != std::string::npos;
  CHECK(mentions_horizon);
}

TEST_CASE("validate_config: parse errors carry line numbers") {
  ParsedConfig bad = parse_config_text("[policy]\nsigma = banana\n");
  ValidationResult v = validate_config(bad);
  REQUIRE_FALSE(v.ok());
  bool has_line = false;
  for (const auto& e : v.errors) has_line |= e.find("line 2") != std::string::npos;
  CHECK(has_line);
}

TEST_CASE("validate_config: valid text resolves and the manifest round-trips") {
  ValidationResult v = validate_config(parse_config_text(kValidText));
  REQUIRE(v.ok());
  CHECK(v.config->batches == 2);
  CHECK(v.config->sigma == doctest::Approx(0.1));

  std::string manifest = v.config->to_manifest(kCodeVersion);
  ValidationResult again = validate_config(parse_config_text(manifest));
  REQUIRE(again.ok());
  CHECK(again.config->to_manifest(kCodeVersion) == manifest);
}

TEST_CASE("validate_config: safe_set section builds a composite set") {
  ValidationResult v = validate_config(parse_config_text(
      "[policy]\nsigma = 0.1\n[safe_set]\nballs = 0, 0, 1\nrows = 1, 1, 0\n"));
  REQUIRE(v.ok());
  REQUIRE(v.config->safe_set.has_value());
  CHECK(v.config->safe_set->size() == 2);
  CHECK(v.config->safe_set->is_member(Eigen::Vector2d(0, 0), Eigen::Vector2d(-0.1, 0)));
  CHECK_FALSE(v.config->safe_set->is_member(Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0.4)));
}

TEST_CASE("run_section5: zero step size keeps the policy and J constant") {
  ExperimentConfig cfg = tiny_config();
  cfg.step_size = 0.0;
  RunResult res = run_section5(cfg, fs::temp_directory_path() / "safepg_step0");
  REQUIRE(res.rows.size() == 3);
  Eigen::VectorXd theta0 = cfg.initial_policy().mean.params();
  for (const auto& r : res.rows) {
    CHECK((r.theta - theta0).lpNorm<Eigen::Infinity>() == 0.0);
    // common evaluation streams: identical policy means identical estimate
    CHECK(r.j_mean == doctest::Approx(res.j_initial).epsilon(1e-15));
  }
}

TEST_CASE("run_section5: run directory contains the full artifact set") {
  ExperimentConfig cfg = tiny_config();
  fs::path dir = fs::temp_directory_path() / "safepg_artifacts";
  RunResult res = run_section5(cfg, dir);
  CHECK(fs::exists(res.manifest_path));
  CHECK(fs::exists(res.runlog_path));
  CHECK(fs::exists(res.traj_first_path));
  CHECK(fs::exists(res.traj_last_path));
  CHECK(static_cast<int>(res.rows.size()) == cfg.batches);
  // header + one row per batch
  std::string runlog = slurp(res.runlog_path);
  CHECK(std::count(runlog.begin(), runlog.end(), '\n') == cfg.batches + 1);
  CHECK(res.total_safety_violations == 0);
}

TEST_CASE("run_section5: same manifest reproduces byte-identical CSVs") {
  ExperimentConfig cfg = tiny_config();
  fs::path dir_a = fs::temp_directory_path() / "safepg_det_a";
  fs::path dir_b = fs::temp_directory_path() / "safepg_det_b";
  RunResult a = run_section5(cfg, dir_a);

  ValidationResult reloaded = validate_config(parse_config_text(slurp(a.manifest_path)));
  REQUIRE(reloaded.ok());
  RunResult b = run_section5(*reloaded.config, dir_b);

  CHECK(slurp(a.runlog_path) == slurp(b.runlog_path));
  CHECK(slurp(a.traj_first_path) == slurp(b.traj_first_path));
  CHECK(slurp(a.traj_last_path) == slurp(b.traj_last_path));
  CHECK(slurp(a.manifest_path) == slurp(b.manifest_path));
}

TEST_CASE("run_section5: vanishing noise and exploration reduce to the rollout cost") {
  ExperimentConfig cfg = tiny_config();
  cfg.plant.noise_enabled = false;
  cfg.sigma = 1e-9;
  cfg.step_size = 0.0;
  cfg.eval_episodes = 1;
  RunResult res = run_section5(cfg, fs::temp_directory_path() / "safepg_quiet");

  TubeMpcProblem tube = build_tube(cfg.tube_config());
  PolicyComposition comp;
  comp.policy = cfg.initial_policy();
  comp.stochastic = false;
  comp.safeguard = Safeguard::mpc_projection;
  comp.mpc = &tube;
  RngStream rng(0);
  auto log = rollout(cfg.plant, cfg.cost, comp, cfg.x0, cfg.eval_horizon, rng);
  double expect = 0.0;
  double discount = 1.0;
  for (const auto& tr : log) {
    expect += discount * tr.cost;
    discount *= cfg.gamma;
  }
  CHECK(std::abs(res.j_initial - expect) <= 1e-6);
}

TEST_CASE("demos: fig1 values, fig2 boundary mass, unknown name") {
  ExperimentConfig cfg = default_experiment_config();
  fs::path dir = fs::temp_directory_path() / "safepg_demos";

  auto fig1 = run_demo("fig1", cfg, dir);
  REQUIRE(fig1.size() == 1);
  std::string csv = slurp(fig1[0]);
  CHECK(csv.find("policy,u1,u2,qvalue") != std::string::npos);
  {
    std::istringstream is(csv);
    std::string header, safe_line, proj_line;
    std::getline(is, header);
    std::getline(is, safe_line);
    std::getline(is, proj_line);
    double u1, u2, qv;
    char name[32];
    REQUIRE(std::sscanf(safe_line.c_str(), "%[^,],%lf,%lf,%lf", name, &u1, &u2, &qv) == 4);
    CHECK(qv == doctest::Approx(440.0 / 121.0).epsilon(1e-9));
    REQUIRE(std::sscanf(proj_line.c_str(), "%[^,],%lf,%lf,%lf", name, &u1, &u2, &qv) == 4);
    CHECK(qv == doctest::Approx(11.0).epsilon(1e-9));
  }

  auto fig2 = run_demo("fig2", cfg, dir);
  std::string hist = slurp(fig2[0]);
  auto pos = hist.find("boundary_fraction=");
  REQUIRE(pos != std::string::npos);
  const double fraction = std::stod(hist.substr(pos + 18));
  CHECK(fraction > 0.9);

  CHECK_THROWS_AS(run_demo("fig99", cfg, dir), Error);
}

TEST_CASE("demos: bias studies expose the estimator gap") {
  ExperimentConfig cfg = default_experiment_config();
  fs::path dir = fs::temp_directory_path() / "safepg_demos";
  auto det = run_demo("bias-det", cfg, dir);
  std::string csv = slurp(det[0]);
  auto pos = csv.find("naive_angle_deg=");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(csv.substr(pos + 16)) > 10.0);
  pos = csv.find("corrected_rel_err=");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(csv.substr(pos + 18)) <= 1e-3);

  auto stoch = run_demo("bias-stoch", cfg, dir);
  CHECK(slurp(stoch[0]).find("oracle_gradient=") != std::string::npos);
}
