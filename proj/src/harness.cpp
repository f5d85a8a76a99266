#include "safepg/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "safepg/critic.hpp"
#include "safepg/env.hpp"
#include "safepg/q_safe.hpp"

namespace safepg {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

// Stream-id salts so the rollout, evaluation, and demo draws never collide.
constexpr std::uint64_t kEvalSalt = 0x45564153ull;   // evaluation episodes
constexpr std::uint64_t kBatchSalt = 0x42415453ull;  // training rollouts

long count_violations(const std::vector<Transition>& log) {
  long n = 0;
  for (const auto& tr : log)
    if (tr.x_next.squaredNorm() > 1.0 + 1e-9) ++n;
  return n;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::invalid_argument, "cannot write " + path.string());
  os << text;
}

std::string runlog_csv(const std::vector<RunLogRow>& rows) {
  std::string out =
      "batch,th_u1,th_u2,th_x1,th_x2,th_k11,th_k12,th_k21,th_k22,"
      "grad_norm,j_mean,j_se,j_norm,safety_violations,dropped_samples\n";
  char line[512];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%ld,%ld\n",
                  r.batch, r.theta[0], r.theta[1], r.theta[2], r.theta[3], r.theta[4],
                  r.theta[5], r.theta[6], r.theta[7], r.grad_norm, r.j_mean, r.j_se,
                  r.j_norm, r.safety_violations, r.dropped);
    out += line;
  }
  return out;
}

}  // namespace

RunResult run_section5(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TubeMpcProblem tube = build_tube(cfg.tube_config());

  GaussianPolicy policy = cfg.initial_policy();
  PolicyComposition comp;
  comp.policy = policy;
  comp.stochastic = true;
  comp.safeguard = Safeguard::mpc_projection;
  comp.mpc = &tube;

  const std::uint64_t eval_seed = cfg.seed ^ kEvalSalt;

  RunResult result;
  result.out_dir = out_dir;
  result.manifest_path = out_dir / "manifest.ini";
  result.runlog_path = out_dir / "runlog.csv";
  result.traj_first_path = out_dir / "traj_first.csv";
  result.traj_last_path = out_dir / "traj_last.csv";
  write_file(result.manifest_path, cfg.to_manifest(kCodeVersion));

  // J(theta_0) on the common evaluation streams.
  ReturnEstimate j0 = evaluate_return(cfg.plant, cfg.cost, comp, cfg.x0, cfg.gamma,
                                      cfg.eval_horizon, cfg.eval_episodes, eval_seed);
  result.j_initial = j0.mean;

  for (int b = 1; b <= cfg.batches; ++b) {
    try {
      std::vector<Transition> batch_log;
      batch_log.reserve(static_cast<std::size_t>(cfg.episodes_per_batch) *
                        static_cast<std::size_t>(cfg.episode_len));
      for (int e = 0; e < cfg.episodes_per_batch; ++e) {
        RngStream rng = RngStream::derive(
            cfg.seed ^ kBatchSalt,
            static_cast<std::uint64_t>(b) * 1000003ull + static_cast<std::uint64_t>(e));
        auto episode = rollout(cfg.plant, cfg.cost, comp, cfg.x0, cfg.episode_len, rng, e);
        batch_log.insert(batch_log.end(), episode.begin(), episode.end());
      }
      const long violations = count_violations(batch_log);
      result.total_safety_violations += violations;

      if (b == 1) {
        std::ofstream os(result.traj_first_path, std::ios::binary);
        write_transitions_csv(batch_log, os);
      }
      if (b == cfg.batches) {
        std::ofstream os(result.traj_last_path, std::ios::binary);
        write_transitions_csv(batch_log, os);
      }

      std::vector<VTransition> v_batch;
      std::vector<ATransition> a_batch;
      v_batch.reserve(batch_log.size());
      a_batch.reserve(batch_log.size());
      for (const auto& tr : batch_log) {
        v_batch.push_back({tr.x, tr.cost, tr.x_next});
        a_batch.push_back({tr.x, tr.u_sample, tr.u, tr.cost, tr.x_next});
      }
      ValueWeights v = lstd_v(v_batch, cfg.gamma);
      VectorXd w = lstd_compatible_advantage(a_batch, v, comp.policy, cfg.gamma);

      std::vector<StochGradSample> grad_batch;
      grad_batch.reserve(batch_log.size());
      for (const auto& tr : batch_log)
        grad_batch.push_back({tr.x, tr.u_sample, tr.u,
                              advantage_estimate(w, comp.policy, tr.x, tr.u_sample)});
      GradientEstimate estimate = stoch_policy_gradient_corrected(comp.policy, grad_batch);

      VectorXd theta = comp.policy.mean.params();
      if (cfg.step_size > 0.0) theta = ascend(theta, estimate, cfg.step_size);
      comp.policy.mean.set_params(theta);

      ReturnEstimate jb = evaluate_return(cfg.plant, cfg.cost, comp, cfg.x0, cfg.gamma,
                                          cfg.eval_horizon, cfg.eval_episodes, eval_seed);

      RunLogRow row;
      row.batch = b;
      row.theta = theta;
      row.grad_norm = estimate.gradient.norm();
      row.j_mean = jb.mean;
      row.j_se = jb.std_error;
      row.j_norm = result.j_initial != 0.0 ? jb.mean / result.j_initial : 0.0;
      row.safety_violations = violations;
      row.dropped = estimate.dropped;
      result.rows.push_back(std::move(row));
    } catch (const Error& e) {
      raise(e.code(), "batch " + std::to_string(b) + ": " + e.what());
    }
  }

  write_file(result.runlog_path, runlog_csv(result.rows));
  return result;
}

DetBiasStudy det_bias_study() {
  // Noise-free plant, halfspace u1 + u2 <= -0.2 kept strictly active by the
  // policy along the whole trajectory.
  PlantModel plant;
  plant.noise_enabled = false;
  QuadStageCost cost;
  MatrixXd g(1, 2);
  g << 1, 1;
  ConstraintSet set = ConstraintSet::affine(g, VectorXd::Constant(1, -0.2));

  AffinePolicy pol = AffinePolicy::zero(2, 2);
  pol.input_ref = Vector2d(0.35, 0.2);
  pol.gain = 0.3 * Matrix2d::Identity();
  const double gamma = 0.9;
  const int steps = 200;
  const Vector2d x0(0, 1);
  const Matrix2d a = plant.rotation();

  auto truncated_return = [&](const VectorXd& theta) {
    AffinePolicy p = AffinePolicy::from_params(theta, 2, 2);
    Vector2d x = x0;
    double total = 0.0;
    double discount = 1.0;
    for (int k = 0; k < steps; ++k) {
      Vector2d u = project(set, x, p.mean(x)).projected;
      total += discount * cost.eval(x, u);
      discount *= gamma;
      x = a * x + u;
    }
    return total;
  };

  DetBiasStudy out;
  out.total_steps = steps;

  // forward pass
  std::vector<Vector2d> xs(steps + 1), us(steps);
  std::vector<ProjectionOutcome> outcomes(steps);
  xs[0] = x0;
  for (int k = 0; k < steps; ++k) {
    outcomes[k] = project(set, xs[k], pol.mean(xs[k]));
    us[k] = outcomes[k].projected;
    if (!outcomes[k].active.empty()) ++out.active_steps;
    xs[k + 1] = a * xs[k] + us[k];
  }

  // adjoint sweep for the exact input-gradient of the cost-to-go
  std::vector<Vector2d> q_u(steps);
  Vector2d gnext = Vector2d::Zero();  // grad of V_{k+1} at x_{k+1}
  for (int k = steps - 1; k >= 0; --k) {
    const MatrixXd du_dx = outcomes[k].correction
                               ? MatrixXd(*outcomes[k].correction * (-pol.gain))
                               : MatrixXd(MatrixXd::Zero(2, 2));
    q_u[k] = cost.grad_u(us[k]) + gamma * gnext;
    gnext = cost.grad_x(xs[k]) + du_dx.transpose() * cost.grad_u(us[k]) +
            (a + du_dx).transpose() * (gamma * gnext);
  }

  std::vector<DetGradSample> batch;
  batch.reserve(static_cast<std::size_t>(steps));
  double discount = 1.0;
  for (int k = 0; k < steps; ++k) {
    batch.push_back({xs[k], outcomes[k], discount * q_u[k]});
    discount *= gamma;
  }
  GradientEstimate corrected = det_policy_gradient_corrected(pol, batch);
  GradientEstimate naive = det_policy_gradient_naive(pol, batch);
  out.dropped = corrected.dropped;
  out.corrected = corrected.gradient * corrected.sample_count;
  out.naive = naive.gradient * naive.sample_count;

  VectorXd theta = pol.params();
  out.fd_gradient.resize(theta.size());
  for (int p = 0; p < theta.size(); ++p) {
    VectorXd tp = theta, tm = theta;
    tp[p] += 1e-5;
    tm[p] -= 1e-5;
    out.fd_gradient[p] = (truncated_return(tp) - truncated_return(tm)) / 2e-5;
  }

  const double scale = std::max(1.0, out.fd_gradient.lpNorm<Eigen::Infinity>());
  out.corrected_rel_err =
      (out.corrected - out.fd_gradient).lpNorm<Eigen::Infinity>() / scale;
  const double cosine = out.naive.dot(out.fd_gradient) /
                        std::max(1e-300, out.naive.norm() * out.fd_gradient.norm());
  out.naive_angle_deg = std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / M_PI;
  return out;
}

StochBiasStudy stoch_bias_study(double theta, double sigma, long samples,
                                std::uint64_t seed) {
  StochBiasStudy out;
  out.samples = samples;
  const double boundary = 1.0;
  auto cost = [](double u) { return (u - 0.5) * (u - 0.5); };
  auto cost_grad = [](double u) { return 2.0 * (u - 0.5); };

  // Quadrature of dJ/dtheta = int_{z < z*} c'(theta + sigma z) phi(z) dz;
  // above the kink the clipped cost is constant in theta.
  const double zstar = (boundary - theta) / sigma;
  {
    std::vector<double> nodes, weights;
    const double lo = -10.0;
    const double hi = std::min(zstar, 10.0);
    double total = 0.0;
    if (hi > lo) {
      const int segments = 64;
      for (int s = 0; s < segments; ++s) {
        const double a = lo + (hi - lo) * s / segments;
        const double b = lo + (hi - lo) * (s + 1) / segments;
        // 16-point Gauss-Legendre per segment, nodes by Newton on P_16
        const int n = 16;
        for (int i = 0; i < n; ++i) {
          double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
          double dp = 0.0;
          for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
              double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
              p0 = p1;
              p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
          }
          const double node = 0.5 * (b - a) * x + 0.5 * (a + b);
          const double weight = (b - a) / ((1.0 - x * x) * dp * dp);
          const double phi = std::exp(-0.5 * node * node) / std::sqrt(2.0 * M_PI);
          total += weight * cost_grad(theta + sigma * node) * phi;
        }
      }
    }
    out.oracle_gradient = total;
  }
  out.mass_beyond = 0.5 * std::erfc(zstar / std::sqrt(2.0));

  GaussianPolicy policy;
  policy.mean = AffinePolicy::zero(1, 1);
  policy.mean.input_ref = VectorXd::Constant(1, theta);
  policy.sigma = sigma;

  RngStream rng = RngStream::derive(seed, 0x53544f43ull);
  VectorXd x = VectorXd::Zero(1);
  double sum_c = 0.0, sumsq_c = 0.0, sum_n = 0.0, sumsq_n = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double us = theta + sigma * rng.gauss();
    const double u = std::min(us, boundary);
    const double adv = cost(u);
    const double term_c = (us - theta) / (sigma * sigma) * adv;
    const double term_n = (u - theta) / (sigma * sigma) * adv;
    sum_c += term_c;
    sumsq_c += term_c * term_c;
    sum_n += term_n;
    sumsq_n += term_n * term_n;
  }
  (void)x;
  const double n = static_cast<double>(samples);
  out.corrected_mean = sum_c / n;
  out.naive_mean = sum_n / n;
  out.corrected_se =
      std::sqrt(std::max(0.0, sumsq_c / n - out.corrected_mean * out.corrected_mean) / n);
  out.naive_se =
      std::sqrt(std::max(0.0, sumsq_n / n - out.naive_mean * out.naive_mean) / n);
  return out;
}

std::vector<std::filesystem::path> run_demo(const std::string& name,
                                            const ExperimentConfig& cfg,
                                            const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  char line[512];

  if (name == "fig1") {
    MatrixXd h(2, 2);
    h << 2, 0, 0, 20;
    QuadraticQ q = QuadraticQ::from_input_quadratic(h, Vector2d(-4, 0), 4.0, 2);
    MatrixXd g(1, 2);
    g << 1, 1;
    ConstraintSet set = ConstraintSet::affine(g, VectorXd::Zero(1));
    Vector2d x(0, 0);
    VectorXd safe = extract_safe_policy(q, set, x);
    VectorXd projected = extract_projected_policy(q, set, x);
    std::string csv = "policy,u1,u2,qvalue\n";
    std::snprintf(line, sizeof(line), "safe,%.17g,%.17g,%.17g\n", safe[0], safe[1],
                  q.value(x, safe));
    csv += line;
    std::snprintf(line, sizeof(line), "projected,%.17g,%.17g,%.17g\n", projected[0],
                  projected[1], q.value(x, projected));
    csv += line;
    auto path = out_dir / "fig1.csv";
    std::ofstream os(path, std::ios::binary);
    os << csv;
    written.push_back(path);
    return written;
  }

  if (name == "fig2") {
    ConstraintSet disk = ConstraintSet::input_ball(Vector2d::Zero(), 1.0);
    RngStream rng = RngStream::derive(cfg.seed, 0x46494732ull);
    auto sampler = [](RngStream& r) {
      return VectorXd(Vector2d(2.0 + 0.3 * r.gauss(), 0.3 * r.gauss()));
    };
    BoundaryHistogram hist =
        boundary_mass_histogram(disk, Vector2d::Zero(), sampler, 100000, 40, rng);
    auto path = out_dir / "fig2_histogram.csv";
    std::ofstream os(path, std::ios::binary);
    write_histogram_csv(hist, os);
    written.push_back(path);
    return written;
  }

  if (name == "bias-det") {
    DetBiasStudy study = det_bias_study();
    std::string csv = "param,fd,corrected,naive\n";
    const char* names[8] = {"u1", "u2", "x1", "x2", "k11", "k12", "k21", "k22"};
    for (int p = 0; p < study.fd_gradient.size(); ++p) {
      std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g\n", names[p],
                    study.fd_gradient[p], study.corrected[p], study.naive[p]);
      csv += line;
    }
    std::snprintf(line, sizeof(line),
                  "corrected_rel_err=%.17g\nnaive_angle_deg=%.17g\nactive_steps=%d\n",
                  study.corrected_rel_err, study.naive_angle_deg, study.active_steps);
    csv += line;
    auto path = out_dir / "bias_det.csv";
    std::ofstream os(path, std::ios::binary);
    os << csv;
    written.push_back(path);
    return written;
  }

  if (name == "bias-stoch") {
    StochBiasStudy study = stoch_bias_study(1.2, 0.5, 200000, cfg.seed);
    std::string csv = "estimator,mean,std_error,abs_dev_from_oracle,dev_in_se\n";
    std::snprintf(line, sizeof(line), "corrected,%.17g,%.17g,%.17g,%.17g\n",
                  study.corrected_mean, study.corrected_se,
                  std::abs(study.corrected_mean - study.oracle_gradient),
                  std::abs(study.corrected_mean - study.oracle_gradient) /
                      study.corrected_se);
    csv += line;
    std::snprintf(line, sizeof(line), "naive,%.17g,%.17g,%.17g,%.17g\n",
                  study.naive_mean, study.naive_se,
                  std::abs(study.naive_mean - study.oracle_gradient),
                  std::abs(study.naive_mean - study.oracle_gradient) / study.naive_se);
    csv += line;
    std::snprintf(line, sizeof(line), "oracle_gradient=%.17g\nmass_beyond=%.17g\n",
                  study.oracle_gradient, study.mass_beyond);
    csv += line;
    auto path = out_dir / "bias_stoch.csv";
    std::ofstream os(path, std::ios::binary);
    os << csv;
    written.push_back(path);
    return written;
  }

  raise(ErrorCode::unknown_demo, "unknown demo '" + name + "'");
}

}  // namespace safepg
