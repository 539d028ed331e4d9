#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ksbt/errors.hpp"
#include "ksbt/run.hpp"

using namespace ksbt;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(const std::string& name, const std::string& extra = "") {
  const fs::path dir = fs::path(KSBT_TEST_TMP) / name;
  fs::remove_all(dir);
  return parse_config_text("grid.Nx = 5\ngrid.Nv = 5\ngrid.Nt = 4\ngrid.T = 1\noutput.dir = " + dir.string() +
                           "\n" + extra);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("constants report") {
  const RunConfig cfg = small_config("constants");
  std::ostringstream out;
  CHECK(run_constants(cfg, out) == exit_ok);
  const auto j = nlohmann::json::parse(out.str());
  const auto c = wellposedness_constants(cfg.kernel, 1.0, 1.0);
  CHECK(j["K_beta"].get<double>() ==
        doctest::Approx(k_beta(2, 1.0, 1.0, 1.0, c.norm_b2, c.norm_b3, dimensional_constant(2))));
  CHECK(j["C_out"].get<double>() == doctest::Approx(c.c_out(0.5 * c.threshold)));
  CHECK(j["config_hash"].get<std::string>() == cfg.hash());
  CHECK(fs::exists(fs::path(cfg.output.dir) / "constants.json"));

  const RunConfig over = small_config("constants_over", "initial.factor = 1.2\n");
  std::ostringstream o2;
  CHECK(run_constants(over, o2) == exit_ok);
  const auto j2 = nlohmann::json::parse(o2.str());
  CHECK_FALSE(j2["smallness_accepted"].get<bool>());
  CHECK(j2["discriminant"].get<double>() < 0.0);
}

TEST_CASE("zero initial data converges at once") {
  const RunConfig cfg = small_config("zero", "initial.factor = 0\n");
  std::ostringstream log;
  CHECK(run_solve(cfg, {}, log) == exit_ok);
  const auto s = nlohmann::json::parse(slurp(fs::path(cfg.output.dir) / "summary.json"));
  CHECK(s["iterations"].get<int>() == 1);
  CHECK(s["final_gap"].get<double>() == 0.0);
  CHECK(s["converged"].get<bool>());
  const std::string trace = slurp(fs::path(cfg.output.dir) / "trace.csv");
  CHECK(trace.rfind("# config_hash " + cfg.hash(), 0) == 0);
}

TEST_CASE("large data is refused unless overridden") {
  const RunConfig cfg = small_config("refuse", "initial.factor = 1.5\n");
  std::ostringstream log;
  CHECK(run_command("solve", cfg, {}, log) == exit_certificate);
  RunOptions o;
  o.override_smallness = true;
  // Overridden, the run proceeds and reports the outcome it reaches.
  const int code = run_command("solve", cfg, o, log);
  CHECK((code == exit_ok || code == exit_certificate || code == exit_nonconvergence));
  const auto s = nlohmann::json::parse(slurp(fs::path(cfg.output.dir) / "summary.json"));
  CHECK(s["flagged"].get<bool>());
}

TEST_CASE("checkpoints round trip and resume refuses a different config") {
  RunConfig cfg = small_config("resume", "solver.n_max = 2\nsolver.eps_gap = 1e-30\n");
  std::ostringstream log;
  run_solve(cfg, {}, log);
  const fs::path ck = fs::path(cfg.output.dir) / "checkpoints" / "iter_0002.bin";
  REQUIRE(fs::exists(ck));
  const PhaseGrid g = cfg.phase_grid();
  const Checkpoint cp = read_checkpoint(ck.string(), g);
  CHECK(cp.n == 2);
  CHECK(cp.config_hash == cfg.hash());
  CHECK(cp.trace.size() == 2);
  CHECK(cp.l.size() == g.size());

  const fs::path copy = fs::path(cfg.output.dir) / "copy.bin";
  write_checkpoint(copy.string(), g, cp);
  const Checkpoint back = read_checkpoint(copy.string(), g);
  CHECK(back.l == cp.l);
  CHECK(back.u == cp.u);
  CHECK(back.c_out == cp.c_out);
  CHECK(back.trace.back().gap == cp.trace.back().gap);
  CHECK_THROWS(read_checkpoint(copy.string(), g.with_time(5, 1.0)));

  // Continue the same scenario with a larger budget: the hash changes with
  // solver.n_max, so the resume is refused.
  RunConfig more = cfg;
  more.solver.n_max = 10;
  RunOptions r;
  r.resume = true;
  CHECK(run_command("solve", more, r, log) == exit_config);
  // Same config resumes.
  CHECK(run_command("solve", cfg, r, log) != exit_config);
}

TEST_CASE("verify and kernels write their tables") {
  const RunConfig cfg = small_config("verify",
                                     "verify.conv_samples = 4\nverify.time_points = 2\nverify.time_samples = 20\n"
                                     "verify.frames = 200\n");
  std::ostringstream log;
  CHECK(run_verify(cfg, log) == exit_ok);
  const std::string certs = slurp(fs::path(cfg.output.dir) / "certificates.csv");
  CHECK(certs.rfind("# config_hash " + cfg.hash(), 0) == 0);
  CHECK(certs.find("conservation") != std::string::npos);
  CHECK(certs.find("time_lemma") != std::string::npos);
  RunOptions o;
  o.kernel_frames = 10;
  CHECK(run_kernels(cfg, o, log) == exit_ok);
  const std::string frames = slurp(fs::path(cfg.output.dir) / "frames.csv");
  CHECK(std::count(frames.begin(), frames.end(), '\n') == 2 + 20);
}

TEST_CASE("unknown subcommand") {
  std::ostringstream log;
  CHECK(run_command("frobnicate", small_config("unknown"), {}, log) == exit_config);
}
