#include <doctest.h>

#include <string>

#include "ksbt/config.hpp"
#include "ksbt/errors.hpp"

using namespace ksbt;

namespace {

std::vector<std::string> issues_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  for (const auto& s : issues)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c = parse_config_text("");
  CHECK(c.dim == 2);
  CHECK(c.alpha == 1.0);
  CHECK(c.kernel.gamma2 == 1.0);
  CHECK(c.kernel.b2.kind() == AngularDensity::Kind::hard_sphere);
  CHECK(c.kernel.b3.kind() == AngularDensity::Kind::derived_ternary);
  CHECK(c.grid.Nx == 16);
  CHECK(c.grid.Nt == 64);
  CHECK(c.initial.factor == 0.5);
  CHECK(c.solver.eps_gap == 1e-6);
  CHECK(c.quad.backend == Backend::deterministic);
  CHECK(config_violations(c).empty());
  const PhaseGrid g = c.phase_grid();
  CHECK(std::exp(-g.Rx() * g.Rx()) == doctest::Approx(1e-8));
}

TEST_CASE("values, comments and sections") {
  const RunConfig c = parse_config_text(
      "# scenario\n"
      "alpha = 2.5   # trailing comment\n"
      "kernel.gamma2 = 0\n"
      "kernel.b3 = zero\n"
      "grid.Nx = 12\n"
      "quadrature.backend = monte_carlo\n"
      "seed = 42\n"
      "workers = 3\n");
  CHECK(c.alpha == 2.5);
  CHECK(c.kernel.gamma2 == 0.0);
  CHECK(c.kernel.b3.is_zero());
  CHECK(c.grid.Nx == 12);
  CHECK(c.quad.backend == Backend::monte_carlo);
  CHECK(c.quad.seed == 42u);
  CHECK(c.quad.workers == 3);
}

TEST_CASE("out-of-range exponents and vanishing kernels are rejected") {
  CHECK(mentions(issues_of("kernel.gamma2 = -2\n"), "kernel.gamma2"));
  CHECK(mentions(issues_of("kernel.gamma3 = 1.5\n"), "kernel.gamma3"));
  CHECK(mentions(issues_of("kernel.b2 = zero\nkernel.b3 = zero\n"), "both be zero"));
}

TEST_CASE("every problem is itemised") {
  const auto issues = issues_of(
      "alpha = -1\n"
      "grid.Nx = one\n"
      "bogus.key = 3\n"
      "beta = 1\n"
      "beta = 2\n"
      "quadrature.n_ang = 7\n"
      "no equals sign\n");
  CHECK(issues.size() >= 6);
  CHECK(mentions(issues, "alpha"));
  CHECK(mentions(issues, "grid.Nx"));
  CHECK(mentions(issues, "bogus.key"));
  CHECK(mentions(issues, "duplicate"));
  CHECK(mentions(issues, "n_ang"));
  CHECK(mentions(issues, "line 7"));
  try {
    parse_config_text("dim = 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dim") != std::string::npos);
  }
}

TEST_CASE("angular specifications") {
  CHECK(angular_from_spec("constant:0.25", 2, CollisionKind::binary, ".")(0.3) == 0.25);
  CHECK_THROWS(angular_from_spec("constant:abc", 2, CollisionKind::binary, "."));
  CHECK_THROWS(angular_from_spec("no_such_file.csv", 2, CollisionKind::binary, "."));
  CHECK(mentions(issues_of("kernel.b2 = nothing_here.csv\n"), "kernel.b2"));
}

TEST_CASE("canonical form and hash") {
  const RunConfig a = parse_config_text("alpha = 1\nbeta = 1.0\n");
  const RunConfig b = parse_config_text("beta = 1\n\n# x\nalpha = 1.000\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  // The output directory does not change the scenario.
  CHECK(parse_config_text("output.dir = elsewhere\n").hash() == a.hash());
  CHECK(parse_config_text("alpha = 1.5\n").hash() != a.hash());
  // Reference FNV-1a 64 values.
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("command line overrides") {
  RunConfig c = parse_config_text("seed = 3\n");
  std::uint64_t s = 9;
  int w = 2;
  apply_overrides(c, &s, &w);
  CHECK(c.seed == 9u);
  CHECK(c.quad.seed == 9u);
  CHECK(c.workers == 2);
  CHECK(c.quad.workers == 2);
  apply_overrides(c, nullptr, nullptr);
  CHECK(c.seed == 9u);
}
