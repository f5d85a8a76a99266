#include "safepg/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace safepg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Field-by-field reader that accumulates line-referenced diagnostics instead
// of failing fast.
struct Reader {
  const ParsedConfig& parsed;
  std::vector<std::string>& errors;

  void fail(const std::string& section, const std::string& key, int line,
            const std::string& what) {
    std::ostringstream os;
    os << "[" << section << "] " << key;
    if (line > 0) os << " (line " << line << ")";
    os << ": " << what;
    errors.push_back(os.str());
  }

  bool parse_double(const std::string& text, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(text, &used);
      return used == text.size() && std::isfinite(out);
    } catch (...) {
      return false;
    }
  }

  void get(const std::string& section, const std::string& key, double& out) {
    const auto* e = parsed.find(section, key);
    if (!e) return;
    double v;
    if (!parse_double(e->value, v))
      fail(section, key, e->line, "expected a finite number, got '" + e->value + "'");
    else
      out = v;
  }

  void get(const std::string& section, const std::string& key, int& out) {
    const auto* e = parsed.find(section, key);
    if (!e) return;
    try {
      std::size_t used = 0;
      int v = std::stoi(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("trailing");
      out = v;
    } catch (...) {
      fail(section, key, e->line, "expected an integer, got '" + e->value + "'");
    }
  }

  void get(const std::string& section, const std::string& key, std::uint64_t& out) {
    const auto* e = parsed.find(section, key);
    if (!e) return;
    try {
      std::size_t used = 0;
      unsigned long long v = std::stoull(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("trailing");
      out = v;
    } catch (...) {
      fail(section, key, e->line, "expected a nonnegative integer, got '" + e->value + "'");
    }
  }

  void get_vector(const std::string& section, const std::string& key, int size,
                  Eigen::VectorXd& out) {
    const auto* e = parsed.find(section, key);
    if (!e) return;
    auto parts = split(e->value, ',');
    if (static_cast<int>(parts.size()) != size) {
      fail(section, key, e->line,
           "expected " + std::to_string(size) + " comma-separated numbers");
      return;
    }
    Eigen::VectorXd v(size);
    for (int i = 0; i < size; ++i) {
      if (!parse_double(parts[i], v[i])) {
        fail(section, key, e->line, "entry " + std::to_string(i) + " is not a number");
        return;
      }
    }
    out = v;
  }

  void get_matrix2(const std::string& section, const std::string& key,
                   Eigen::MatrixXd& out) {
    Eigen::VectorXd flat(4);
    const auto* e = parsed.find(section, key);
    if (!e) return;
    get_vector(section, key, 4, flat);
    if (flat.size() == 4) {
      out.resize(2, 2);
      out << flat[0], flat[1], flat[2], flat[3];
    }
  }
};

void format_value(std::ostringstream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

void emit_vector(std::ostringstream& os, const char* key, const Eigen::VectorXd& v) {
  os << key << " = ";
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    format_value(os, v[i]);
  }
  os << "\n";
}

}  // namespace

const ParsedConfig::Entry* ParsedConfig::find(const std::string& section,
                                              const std::string& key) const {
  auto s = sections.find(section);
  if (s == sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig out;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // strip comments
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      out.sections[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::invalid_config,
            "line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    out.sections[section][key] = {value, lineno};
  }
  return out;
}

ParsedConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorCode::invalid_config, "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

GaussianPolicy ExperimentConfig::initial_policy() const {
  GaussianPolicy p;
  p.mean = AffinePolicy::zero(2, 2);
  p.mean.input_ref = policy_input_ref0;
  p.mean.state_ref = policy_state_ref0;
  p.mean.gain = policy_gain0;
  p.sigma = sigma;
  return p;
}

TubeMpcConfig ExperimentConfig::tube_config() const {
  TubeMpcConfig cfg;
  cfg.model = model;
  cfg.cost = cost;
  cfg.horizon = horizon;
  cfg.gamma = gamma;
  cfg.noise_bound = plant.noise_ball;
  cfg.norm = tube_norm;
  return cfg;
}

std::string ExperimentConfig::to_manifest(const std::string& code_version) const {
  std::ostringstream os;
  os << "[meta]\ncode_version = " << code_version << "\n\n";
  os << "[plant]\n";
  os << "angle_deg = ";
  format_value(os, plant.angle_deg);
  os << "\nnoise_cov = ";
  format_value(os, plant.noise_cov);
  os << "\nnoise_ball = ";
  format_value(os, plant.noise_ball);
  os << "\nnoise_enabled = " << (plant.noise_enabled ? 1 : 0) << "\n\n";
  os << "[model]\nangle_deg = ";
  format_value(os, model.angle_deg);
  os << "\nscale = ";
  format_value(os, model.scale);
  os << "\n\n[cost]\n";
  emit_vector(os, "x_ref", cost.x_ref);
  emit_vector(os, "u_ref", cost.u_ref);
  os << "w_x = ";
  format_value(os, cost.w_x);
  os << "\nw_u = ";
  format_value(os, cost.w_u);
  os << "\nconstant = ";
  format_value(os, cost.constant);
  os << "\n\n[policy]\n";
  emit_vector(os, "input_ref0", policy_input_ref0);
  emit_vector(os, "state_ref0", policy_state_ref0);
  Eigen::VectorXd gain_flat(4);
  gain_flat << policy_gain0(0, 0), policy_gain0(0, 1), policy_gain0(1, 0),
      policy_gain0(1, 1);
  emit_vector(os, "gain0", gain_flat);
  os << "sigma = ";
  format_value(os, sigma);
  os << "\n\n[mpc]\nhorizon = " << horizon << "\ngamma = ";
  format_value(os, gamma);
  os << "\ntube_norm = "
     << (tube_norm == TubeNorm::closed_loop_2 ? "closed_loop_2" : "open_loop_inf")
     << "\n\n[learn]\n";
  os << "batches = " << batches << "\n";
  os << "episode_len = " << episode_len << "\n";
  os << "episodes_per_batch = " << episodes_per_batch << "\n";
  os << "eval_episodes = " << eval_episodes << "\n";
  os << "eval_horizon = " << eval_horizon << "\n";
  os << "step_size = ";
  format_value(os, step_size);
  os << "\n\n[run]\nseed = " << seed << "\n";
  Eigen::VectorXd x0v = x0;
  emit_vector(os, "x0", x0v);
  return os.str();
}

ExperimentConfig default_experiment_config() { return ExperimentConfig{}; }

ValidationResult validate_config(const ParsedConfig& parsed) {
  ValidationResult out;
  ExperimentConfig cfg = default_experiment_config();
  Reader r{parsed, out.errors};

  r.get("plant", "angle_deg", cfg.plant.angle_deg);
  r.get("plant", "noise_cov", cfg.plant.noise_cov);
  r.get("plant", "noise_ball", cfg.plant.noise_ball);
  int noise_enabled = cfg.plant.noise_enabled ? 1 : 0;
  r.get("plant", "noise_enabled", noise_enabled);
  cfg.plant.noise_enabled = noise_enabled != 0;

  r.get("model", "angle_deg", cfg.model.angle_deg);
  r.get("model", "scale", cfg.model.scale);

  r.get_vector("cost", "x_ref", 2, cfg.cost.x_ref);
  r.get_vector("cost", "u_ref", 2, cfg.cost.u_ref);
  r.get("cost", "w_x", cfg.cost.w_x);
  r.get("cost", "w_u", cfg.cost.w_u);
  r.get("cost", "constant", cfg.cost.constant);

  r.get_vector("policy", "input_ref0", 2, cfg.policy_input_ref0);
  r.get_vector("policy", "state_ref0", 2, cfg.policy_state_ref0);
  r.get_matrix2("policy", "gain0", cfg.policy_gain0);
  if (!parsed.find("policy", "sigma"))
    out.errors.push_back("[policy] sigma: required field is missing");
  r.get("policy", "sigma", cfg.sigma);

  r.get("mpc", "horizon", cfg.horizon);
  r.get("mpc", "gamma", cfg.gamma);
  if (const auto* e = parsed.find("mpc", "tube_norm")) {
    if (e->value == "closed_loop_2")
      cfg.tube_norm = TubeNorm::closed_loop_2;
    else if (e->value == "open_loop_inf")
      cfg.tube_norm = TubeNorm::open_loop_inf;
    else
      r.fail("mpc", "tube_norm", e->line,
             "expected closed_loop_2 or open_loop_inf, got '" + e->value + "'");
  }

  r.get("learn", "batches", cfg.batches);
  r.get("learn", "episode_len", cfg.episode_len);
  r.get("learn", "episodes_per_batch", cfg.episodes_per_batch);
  r.get("learn", "eval_episodes", cfg.eval_episodes);
  r.get("learn", "eval_horizon", cfg.eval_horizon);
  r.get("learn", "step_size", cfg.step_size);

  r.get("run", "seed", cfg.seed);
  Eigen::VectorXd x0v = cfg.x0;
  r.get_vector("run", "x0", 2, x0v);
  cfg.x0 = x0v;

  // optional safe set for the demo / project subcommands
  if (parsed.sections.count("safe_set")) {
    std::vector<ConstraintSet> parts;
    if (const auto* e = parsed.find("safe_set", "balls")) {
      for (const auto& item : split(e->value, ';')) {
        auto nums = split(item, ',');
        double cx, cy, rad;
        if (nums.size() != 3 || !r.parse_double(nums[0], cx) ||
            !r.parse_double(nums[1], cy) || !r.parse_double(nums[2], rad) || rad <= 0) {
          r.fail("safe_set", "balls", e->line, "each ball is 'cx, cy, radius>0'");
          break;
        }
        parts.push_back(ConstraintSet::input_ball(Eigen::Vector2d(cx, cy), rad));
      }
    }
    if (const auto* e = parsed.find("safe_set", "rows")) {
      std::vector<Eigen::Vector3d> rows;
      bool ok = true;
      for (const auto& item : split(e->value, ';')) {
        auto nums = split(item, ',');
        double g1, g2, b;
        if (nums.size() != 3 || !r.parse_double(nums[0], g1) ||
            !r.parse_double(nums[1], g2) || !r.parse_double(nums[2], b)) {
          r.fail("safe_set", "rows", e->line, "each row is 'g1, g2, b' meaning g'u <= b");
          ok = false;
          break;
        }
        rows.emplace_back(g1, g2, b);
      }
      if (ok && !rows.empty()) {
        Eigen::MatrixXd g(static_cast<int>(rows.size()), 2);
        Eigen::VectorXd b(static_cast<int>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          g.row(static_cast<int>(i)) << rows[i][0], rows[i][1];
          b[static_cast<int>(i)] = rows[i][2];
        }
        parts.push_back(ConstraintSet::affine(g, b));
      }
    }
    if (const auto* e = parsed.find("safe_set", "state_norm")) {
      if (e->value == "1" || e->value == "true") parts.push_back(ConstraintSet::state_norm());
    }
    if (!parts.empty()) cfg.safe_set = ConstraintSet::composite(parts);
  }

  // cross-field checks
  if (cfg.sigma <= 0.0) out.errors.push_back("[policy] sigma: must be positive");
  if (cfg.horizon < 1) out.errors.push_back("[mpc] horizon: must be >= 1");
  if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0)
    out.errors.push_back("[mpc] gamma: must lie in (0, 1)");
  if (cfg.batches < 1) out.errors.push_back("[learn] batches: must be >= 1");
  if (cfg.episode_len < 1) out.errors.push_back("[learn] episode_len: must be >= 1");
  if (cfg.episodes_per_batch < 1)
    out.errors.push_back("[learn] episodes_per_batch: must be >= 1");
  if (cfg.eval_episodes < 1) out.errors.push_back("[learn] eval_episodes: must be >= 1");
  if (cfg.eval_horizon < 1) out.errors.push_back("[learn] eval_horizon: must be >= 1");
  if (cfg.step_size < 0.0) out.errors.push_back("[learn] step_size: must be >= 0");
  if (cfg.plant.noise_cov <= 0.0) out.errors.push_back("[plant] noise_cov: must be positive");
  if (cfg.plant.noise_ball <= 0.0)
    out.errors.push_back("[plant] noise_ball: must be positive");
  if (cfg.cost.w_u <= 0.0) out.errors.push_back("[cost] w_u: must be positive");
  if (cfg.x0.squaredNorm() > 1.0 + 1e-9)
    out.errors.push_back("[run] x0: must satisfy x'x <= 1");

  if (out.errors.empty()) {
    try {
      build_tube(cfg.tube_config());  // feasibility precheck
    } catch (const Error& e) {
      out.errors.push_back(std::string("[mpc] tube precheck failed: ") + e.what());
    }
  }

  if (out.errors.empty()) out.config = cfg;
  return out;
}

ValidationResult validate_config_file(const std::filesystem::path& path) {
  try {
    return validate_config(parse_config_file(path));
  } catch (const Error& e) {
    ValidationResult out;
    out.errors.push_back(e.what());
    return out;
  }
}

}  // namespace safepg
