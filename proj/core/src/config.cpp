#include "ksbt/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ksbt/errors.hpp"
#include "ksbt/quadrature.hpp"

namespace ksbt {

namespace fs = std::filesystem;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string num(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

std::string resolve(const std::string& path, const std::string& dir) {
  const fs::path p(path);
  if (p.is_absolute() || dir.empty()) return path;
  return (fs::path(dir) / p).string();
}

class Reader {
 public:
  explicit Reader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    const std::string& s = it->second;
    if constexpr (std::is_same_v<T, std::string>) {
      out = s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes")
        out = true;
      else if (s == "false" || s == "0" || s == "no")
        out = false;
      else
        errors.push_back(key + " = '" + s + "' is not a boolean");
    } else if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        out = v;
      } catch (const std::exception&) {
        errors.push_back(key + " = '" + s + "' is not a number");
      }
    } else {
      T v{};
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        errors.push_back(key + " = '" + s + "' is not an integer");
      else
        out = v;
    }
  }

  void unknown_keys() {
    for (const auto& [k, v] : kv_)
      if (!seen_.count(k)) errors.push_back("unknown key '" + k + "'");
  }

  std::vector<std::string> errors;

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> seen_;
};

}  // namespace

AngularDensity angular_from_spec(const std::string& spec, int dim, CollisionKind kind, const std::string& source_dir) {
  if (spec == "zero") return AngularDensity::zero();
  if (spec == "hard_sphere" || spec == "hard_sphere_binary") return AngularDensity::hard_sphere();
  if (spec == "derived_ternary") return AngularDensity::derived_ternary();
  if (spec == "maxwell") {
    // Constant angular factor with unit angular norm.
    const int n = kind == CollisionKind::binary ? dim : 2 * dim;
    return AngularDensity::constant(1.0 / sphere_area(n));
  }
  if (spec.rfind("constant:", 0) == 0) {
    std::size_t pos = 0;
    const std::string v = spec.substr(9);
    double c = 0.0;
    try {
      c = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v.size() || !(c >= 0.0)) throw InvalidInput("angular density '" + spec + "': bad constant");
    return AngularDensity::constant(c);
  }
  const std::string path = resolve(spec, source_dir);
  if (!fs::exists(path)) throw InvalidInput("angular density '" + spec + "': no such preset or file");
  return AngularDensity::load_csv(path);
}

PhaseGrid RunConfig::phase_grid() const {
  const Maxwellian m = envelope();
  if (grid.Rx > 0.0 || grid.Rv > 0.0) {
    const double Rx = grid.Rx > 0.0 ? grid.Rx : truncation_radius(alpha, grid.envelope_tol);
    const double Rv = grid.Rv > 0.0 ? grid.Rv : truncation_radius(beta, grid.envelope_tol);
    return PhaseGrid(dim, Rx, Rv, grid.Nx, grid.Nv, grid.Nt, grid.T);
  }
  return PhaseGrid::from_envelope(dim, m, grid.Nx, grid.Nv, grid.Nt, grid.T, grid.envelope_tol);
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["dim"] = std::to_string(dim);
  kv["alpha"] = num(alpha);
  kv["beta"] = num(beta);
  kv["seed"] = std::to_string(seed);
  kv["workers"] = std::to_string(workers);
  kv["kernel.gamma2"] = num(kernel.gamma2);
  kv["kernel.gamma3"] = num(kernel.gamma3);
  kv["kernel.b2"] = b2_spec;
  kv["kernel.b3"] = b3_spec;
  kv["grid.Nx"] = std::to_string(grid.Nx);
  kv["grid.Nv"] = std::to_string(grid.Nv);
  kv["grid.Nt"] = std::to_string(grid.Nt);
  kv["grid.T"] = num(grid.T);
  kv["grid.envelope_tol"] = num(grid.envelope_tol);
  kv["grid.Rx"] = num(grid.Rx);
  kv["grid.Rv"] = num(grid.Rv);
  kv["quadrature.backend"] = quad.backend == Backend::deterministic ? "deterministic" : "monte_carlo";
  kv["quadrature.n_ang"] = std::to_string(quad.n_ang);
  kv["quadrature.n_vel"] = std::to_string(quad.n_vel);
  kv["quadrature.n_vel_ternary"] = std::to_string(quad.n_vel_ternary);
  kv["quadrature.n_chi"] = std::to_string(quad.n_chi);
  kv["quadrature.n_mc"] = std::to_string(quad.n_mc);
  kv["initial.preset"] = initial.preset == InitialPreset::scaled_maxwellian ? "scaled_maxwellian" : "tabulated";
  kv["initial.factor"] = num(initial.factor);
  kv["initial.path"] = initial.path;
  kv["solver.n_max"] = std::to_string(solver.n_max);
  kv["solver.eps_gap"] = num(solver.eps_gap);
  kv["solver.tol_mono"] = num(solver.tol_mono);
  kv["verify.conv_samples"] = std::to_string(verify.conv_samples);
  kv["verify.conv_vmax"] = num(verify.conv_vmax);
  kv["verify.time_samples"] = std::to_string(verify.time_samples);
  kv["verify.time_points"] = std::to_string(verify.time_points);
  kv["verify.T_max"] = num(verify.T_max);
  kv["verify.frames"] = std::to_string(verify.frames);
  kv["estimates.cd_mode"] = cd_mode == CdMode::derived ? "derived" : "normalized";
  kv["output.trace_wall_time"] = output.trace_wall_time ? "true" : "false";
  kv["output.checkpoints"] = output.checkpoints ? "true" : "false";
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

std::vector<std::string> config_violations(const RunConfig& c) {
  std::vector<std::string> e;
  if (c.dim < 2 || c.dim > 3) e.push_back("dim = " + std::to_string(c.dim) + " must be 2 or 3");
  if (!(c.alpha > 0.0)) e.push_back("alpha must be positive");
  if (!(c.beta > 0.0)) e.push_back("beta must be positive");
  if (c.workers < 1) e.push_back("workers must be >= 1");
  for (auto& s : c.kernel.violations())
    if (s.rfind("dim", 0) != 0) e.push_back(s);
  if (c.grid.Nx < 2) e.push_back("grid.Nx must be >= 2");
  if (c.grid.Nv < 2) e.push_back("grid.Nv must be >= 2");
  if (c.grid.Nt < 2) e.push_back("grid.Nt must be >= 2");
  if (!(c.grid.T > 0.0)) e.push_back("grid.T must be positive");
  if (!(c.grid.envelope_tol > 0.0 && c.grid.envelope_tol < 1.0)) e.push_back("grid.envelope_tol must lie in (0, 1)");
  if (c.grid.Rx < 0.0) e.push_back("grid.Rx must be nonnegative");
  if (c.grid.Rv < 0.0) e.push_back("grid.Rv must be nonnegative");
  for (auto& s : c.quad.violations(c.dim))
    if (s.rfind("dim", 0) != 0 && s.rfind("workers", 0) != 0) e.push_back(s);
  // Factors >= 1 are accepted here; solve refuses them unless overridden.
  if (!(c.initial.factor >= 0.0 && std::isfinite(c.initial.factor)))
    e.push_back("initial.factor = " + num(c.initial.factor) + " must be finite and >= 0");
  if (c.initial.preset == InitialPreset::tabulated) {
    if (c.initial.path.empty())
      e.push_back("initial.path is required for initial.preset = tabulated");
    else if (!fs::exists(resolve(c.initial.path, c.source_dir)))
      e.push_back("initial.path '" + c.initial.path + "' does not exist");
  }
  if (c.solver.n_max < 1) e.push_back("solver.n_max must be >= 1");
  if (!(c.solver.eps_gap > 0.0)) e.push_back("solver.eps_gap must be positive");
  if (!(c.solver.tol_mono >= 0.0)) e.push_back("solver.tol_mono must be nonnegative");
  if (c.verify.conv_samples < 1) e.push_back("verify.conv_samples must be >= 1");
  if (!(c.verify.conv_vmax > 0.0)) e.push_back("verify.conv_vmax must be positive");
  if (c.verify.time_samples < 1) e.push_back("verify.time_samples must be >= 1");
  if (c.verify.time_points < 1) e.push_back("verify.time_points must be >= 1");
  if (!(c.verify.T_max > 0.0)) e.push_back("verify.T_max must be positive");
  if (c.verify.frames < 1) e.push_back("verify.frames must be >= 1");
  if (c.output.dir.empty()) e.push_back("output.dir must not be empty");
  return e;
}

RunConfig parse_config_text(const std::string& text, const std::string& source_dir) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    if (kv.count(key)) errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  RunConfig c;
  c.source_dir = source_dir;
  Reader r(kv);
  r.get("dim", c.dim);
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  r.get("kernel.gamma2", c.kernel.gamma2);
  r.get("kernel.gamma3", c.kernel.gamma3);
  r.get("kernel.b2", c.b2_spec);
  r.get("kernel.b3", c.b3_spec);
  r.get("grid.Nx", c.grid.Nx);
  r.get("grid.Nv", c.grid.Nv);
  r.get("grid.Nt", c.grid.Nt);
  r.get("grid.T", c.grid.T);
  r.get("grid.envelope_tol", c.grid.envelope_tol);
  r.get("grid.Rx", c.grid.Rx);
  r.get("grid.Rv", c.grid.Rv);
  std::string backend = "deterministic";
  r.get("quadrature.backend", backend);
  r.get("quadrature.n_ang", c.quad.n_ang);
  r.get("quadrature.n_vel", c.quad.n_vel);
  r.get("quadrature.n_vel_ternary", c.quad.n_vel_ternary);
  r.get("quadrature.n_chi", c.quad.n_chi);
  r.get("quadrature.n_mc", c.quad.n_mc);
  std::string preset = "scaled_maxwellian";
  r.get("initial.preset", preset);
  r.get("initial.factor", c.initial.factor);
  r.get("initial.path", c.initial.path);
  r.get("solver.n_max", c.solver.n_max);
  r.get("solver.eps_gap", c.solver.eps_gap);
  r.get("solver.tol_mono", c.solver.tol_mono);
  r.get("verify.conv_samples", c.verify.conv_samples);
  r.get("verify.conv_vmax", c.verify.conv_vmax);
  r.get("verify.time_samples", c.verify.time_samples);
  r.get("verify.time_points", c.verify.time_points);
  r.get("verify.T_max", c.verify.T_max);
  r.get("verify.frames", c.verify.frames);
  std::string cd = "derived";
  r.get("estimates.cd_mode", cd);
  r.get("output.dir", c.output.dir);
  r.get("output.trace_wall_time", c.output.trace_wall_time);
  r.get("output.checkpoints", c.output.checkpoints);
  r.unknown_keys();
  errors.insert(errors.end(), r.errors.begin(), r.errors.end());

  if (backend == "deterministic")
    c.quad.backend = Backend::deterministic;
  else if (backend == "monte_carlo")
    c.quad.backend = Backend::monte_carlo;
  else
    errors.push_back("quadrature.backend = '" + backend + "' must be deterministic or monte_carlo");
  if (preset == "scaled_maxwellian")
    c.initial.preset = InitialPreset::scaled_maxwellian;
  else if (preset == "tabulated")
    c.initial.preset = InitialPreset::tabulated;
  else
    errors.push_back("initial.preset = '" + preset + "' must be scaled_maxwellian or tabulated");
  if (cd == "derived")
    c.cd_mode = CdMode::derived;
  else if (cd == "normalized")
    c.cd_mode = CdMode::normalized;
  else
    errors.push_back("estimates.cd_mode = '" + cd + "' must be derived or normalized");

  c.kernel.dim = c.dim;
  c.quad.seed = c.seed;
  c.quad.workers = c.workers;
  const int kd = (c.dim == 2 || c.dim == 3) ? c.dim : 2;
  try {
    c.kernel.b2 = angular_from_spec(c.b2_spec, kd, CollisionKind::binary, source_dir);
  } catch (const std::exception& ex) {
    errors.push_back(std::string("kernel.b2: ") + ex.what());
  }
  try {
    c.kernel.b3 = angular_from_spec(c.b3_spec, kd, CollisionKind::ternary, source_dir);
  } catch (const std::exception& ex) {
    errors.push_back(std::string("kernel.b3: ") + ex.what());
  }
  for (auto& s : config_violations(c)) errors.push_back(s);
  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), fs::path(path).parent_path().string());
}

void apply_overrides(RunConfig& c, std::uint64_t* seed, int* workers) {
  if (seed) {
    c.seed = *seed;
    c.quad.seed = *seed;
  }
  if (workers) {
    c.workers = *workers;
    c.quad.workers = *workers;
  }
  const auto e = config_violations(c);
  if (!e.empty()) throw ConfigError(e);
}

}  // namespace ksbt
