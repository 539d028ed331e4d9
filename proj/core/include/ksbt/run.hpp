#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ksbt/config.hpp"
#include "ksbt/ks_solver.hpp"

namespace ksbt {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_certificate = 3, exit_nonconvergence = 4 };

struct RunOptions {
  bool override_smallness = false;
  bool resume = false;    // solve: continue from the newest checkpoint
  int kernel_frames = 1000;
};

// Each writes its artifacts below cfg.output.dir and a short report to log.
int run_constants(const RunConfig& cfg, std::ostream& out);
int run_verify(const RunConfig& cfg, std::ostream& log);
int run_kernels(const RunConfig& cfg, const RunOptions& opt, std::ostream& log);
int run_solve(const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

// Dispatches by name; maps ConfigError to exit_config.
int run_command(const std::string& name, const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

// Initial slice f0 ([v][x]) on the configured grid.
std::vector<double> initial_data(const RunConfig& cfg, const PhaseGrid& grid, const WellposednessConstants& c);

struct Checkpoint {
  int n = 0;
  std::string config_hash;
  double c_out = 0.0;
  std::vector<TraceEntry> trace;
  std::vector<double> l, u;  // internal [t][v][x] layout
};

// Header line of JSON, then l and u as raw little-endian doubles in
// row-major (t, x, v) order.
void write_checkpoint(const std::string& path, const PhaseGrid& grid, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& path, const PhaseGrid& grid);

std::string constants_json(const WellposednessConstants& c, const RunConfig& cfg, int indent = 2);

}  // namespace ksbt
