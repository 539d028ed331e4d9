#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ksbt/cross_sections.hpp"
#include "ksbt/estimates.hpp"
#include "ksbt/operators.hpp"
#include "ksbt/phase_space.hpp"

namespace ksbt {

enum class InitialPreset { scaled_maxwellian, tabulated };

struct GridKeys {
  int Nx = 16, Nv = 16, Nt = 64;
  double T = 4.0;
  double envelope_tol = 1e-8;  // sets the box radii unless Rx / Rv are given
  double Rx = 0.0, Rv = 0.0;   // 0: derived from the envelope
};

struct InitialKeys {
  InitialPreset preset = InitialPreset::scaled_maxwellian;
  double factor = 0.5;  // fraction of the smallness threshold
  std::string path;     // CSV rows: x components, v components, value
};

struct SolverKeys {
  int n_max = 50;
  double eps_gap = 1e-6;
  double tol_mono = 1e-8;
};

struct VerifyKeys {
  int conv_samples = 1000;
  double conv_vmax = 10.0;
  int time_samples = 1000;
  int time_points = 200;
  double T_max = 4.0;
  int frames = 100000;  // random collision frames for the conservation certificate
};

struct OutputKeys {
  std::string dir = "ksbt_out";
  bool trace_wall_time = false;  // wall_time_s column of trace.csv; off keeps traces reproducible
  bool checkpoints = true;
};

struct RunConfig {
  int dim = 2;
  double alpha = 1.0, beta = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  KernelConfig kernel;
  std::string b2_spec = "hard_sphere", b3_spec = "derived_ternary";
  GridKeys grid;
  QuadratureSpec quad;
  InitialKeys initial;
  SolverKeys solver;
  VerifyKeys verify;
  CdMode cd_mode = CdMode::derived;
  OutputKeys output;
  std::string source_dir = ".";  // relative paths resolve against the config file

  Maxwellian envelope() const { return {alpha, beta}; }
  PhaseGrid phase_grid() const;
  // Canonical key = value listing, one per line, sorted.
  std::string canonical() const;
  // FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;
};

// Parses `key = value` lines; '#' starts a comment. Throws ConfigError
// listing every problem found.
RunConfig parse_config_text(const std::string& text, const std::string& source_dir = ".");
RunConfig parse_config(const std::string& path);

// All range and consistency problems of an assembled config.
std::vector<std::string> config_violations(const RunConfig& c);

// Applies the seed / workers overrides of the command line.
void apply_overrides(RunConfig& c, std::uint64_t* seed, int* workers);

// b2/b3 specification: zero, hard_sphere, derived_ternary, maxwell,
// constant:<c> or a CSV path.
AngularDensity angular_from_spec(const std::string& spec, int dim, CollisionKind kind, const std::string& source_dir);

std::string fnv1a_hex(const std::string& text);

}  // namespace ksbt
