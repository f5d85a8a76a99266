#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "safepg/config.hpp"
#include "safepg/harness.hpp"
#include "safepg/projection.hpp"

using namespace safepg;

namespace {

bool parse_vec2(const std::string& text, Eigen::Vector2d& out) {
  double a = 0, b = 0;
  if (std::sscanf(text.c_str(), "%lf , %lf", &a, &b) != 2 &&
      std::sscanf(text.c_str(), "%lf,%lf", &a, &b) != 2)
    return false;
  out << a, b;
  return true;
}

ExperimentConfig load_or_default(const std::string& config_path,
                                 std::optional<std::uint64_t> seed_override) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    ValidationResult v = validate_config_file(config_path);
    if (!v.ok()) {
      for (const auto& e : v.errors) std::cerr << "config error: " << e << "\n";
      std::exit(2);
    }
    cfg = *v.config;
  } else {
    cfg = default_experiment_config();
  }
  if (seed_override) cfg.seed = *seed_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe policy-gradient learning through safe-set projections"};
  app.require_subcommand(1);

  // reproduce-sec5
  std::string cfg_path, out_dir = "run_out";
  std::optional<std::uint64_t> seed;
  auto* sec5 = app.add_subcommand("reproduce-sec5",
                                  "run the tube-MPC stochastic learning study");
  sec5->add_option("--config", cfg_path, "configuration file (defaults built in)");
  sec5->add_option("--seed", seed, "seed override");
  sec5->add_option("--out", out_dir, "output directory");

  // demo
  std::string demo_name, demo_cfg_path, demo_out = "demo_out";
  std::optional<std::uint64_t> demo_seed;
  auto* demo = app.add_subcommand("demo", "emit demonstration CSV artifacts");
  demo->add_option("name", demo_name, "fig1 | fig2 | bias-det | bias-stoch")->required();
  demo->add_option("--config", demo_cfg_path, "configuration file");
  demo->add_option("--seed", demo_seed, "seed override");
  demo->add_option("--out", demo_out, "output directory");

  // project
  std::string proj_cfg_path, x_text = "0,0", target_text;
  auto* proj = app.add_subcommand("project",
                                  "one-shot projection with the correction matrix");
  proj->add_option("--config", proj_cfg_path, "config with a [safe_set] section")
      ->required();
  proj->add_option("--x", x_text, "state 'x1,x2'");
  proj->add_option("--target", target_text, "input to project 'u1,u2'")->required();

  // validate
  std::string val_path;
  auto* val = app.add_subcommand("validate", "check a configuration file");
  val->add_option("file", val_path, "configuration file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sec5) {
      ExperimentConfig cfg = load_or_default(cfg_path, seed);
      RunResult res = run_section5(cfg, out_dir);
      std::printf("run complete: %zu batches, J0=%.6g, final J/J0=%.6g\n",
                  res.rows.size(), res.j_initial,
                  res.rows.empty() ? 1.0 : res.rows.back().j_norm);
      std::printf("safety violations: %ld\n", res.total_safety_violations);
      std::printf("outputs: %s\n", res.out_dir.string().c_str());
      return res.total_safety_violations == 0 ? 0 : 1;
    }

    if (*demo) {
      ExperimentConfig cfg = load_or_default(demo_cfg_path, demo_seed);
      auto paths = run_demo(demo_name, cfg, demo_out);
      for (const auto& p : paths) std::printf("wrote %s\n", p.string().c_str());
      return 0;
    }

    if (*proj) {
      ExperimentConfig cfg = load_or_default(proj_cfg_path, std::nullopt);
      if (!cfg.safe_set) {
        std::cerr << "config has no [safe_set] section\n";
        return 2;
      }
      Eigen::Vector2d x, target;
      if (!parse_vec2(x_text, x) || !parse_vec2(target_text, target)) {
        std::cerr << "--x/--target expect 'a,b'\n";
        return 2;
      }
      ProjectionOutcome res = project(*cfg.safe_set, x, target);
      std::printf("field,value\n");
      std::printf("u1,%.17g\nu2,%.17g\n", res.projected[0], res.projected[1]);
      for (int i = 0; i < res.multipliers.size(); ++i)
        std::printf("mu%d,%.17g\n", i, res.multipliers[i]);
      std::printf("kkt_residual,%.17g\n", res.kkt_residual);
      std::printf("weak_activity,%d\nlicq_ok,%d\n", res.weak_activity ? 1 : 0,
                  res.licq_ok ? 1 : 0);
      if (res.correction) {
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            std::printf("M%d%d,%.17g\n", i + 1, j + 1, (*res.correction)(i, j));
      }
      return 0;
    }

    if (*val) {
      ValidationResult v = validate_config_file(val_path);
      if (!v.ok()) {
        for (const auto& e : v.errors) std::printf("error: %s\n", e.c_str());
        return 2;
      }
      std::printf("%s", v.config->to_manifest(kCodeVersion).c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
