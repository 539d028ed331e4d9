#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ksbt/errors.hpp"
#include "ksbt/estimates.hpp"
#include "ksbt/operators.hpp"

using namespace ksbt;
constexpr double pi = std::numbers::pi;

namespace {

const Maxwellian M{1.0, 1.0};

PhaseGrid small_grid() { return PhaseGrid::from_envelope(2, M, 7, 7, 3, 1.0); }

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("frequency of a Maxwellian: binary and ternary closed forms at t = 0, x = 0") {
  for (double beta : {1.0, 2.0}) {
    KernelConfig k;
    k.gamma2 = 0.0;
    k.gamma3 = 0.0;
    k.b2 = AngularDensity::constant(1.0 / (2 * pi));  // probability density on S^1
    k.b3 = AngularDensity::constant(0.1);
    const RuleBuilder b(k, QuadratureSpec{}, beta);
    const Maxwellian m{1.0, beta};
    const auto g = maxwellian_fn(m, 0.2), h = maxwellian_fn(m, 0.3);
    for (const Vec3& v : {Vec3{0, 0, 0}, Vec3{0.7, -1.1, 0}}) {
      const auto p = evaluate_point(b.build(v), g, g, h, 0.0, {0, 0, 0});
      // Unit angular norm; the integral of exp(-beta|v1|^2) over R^2 is pi / beta.
      CHECK(p.R2 == doctest::Approx(0.2 * pi / beta).epsilon(1e-12));
      CHECK(p.R3 == doctest::Approx(0.1 * 2 * pi * pi * 0.2 * 0.3 * (pi / beta) * (pi / beta)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gain equals loss for Maxwellian inputs at t = 0") {
  const RuleBuilder b(KernelConfig{}, QuadratureSpec{}, 1.0);
  const auto f = maxwellian_fn(M, 0.5), g = maxwellian_fn(M, 0.2), h = maxwellian_fn(M, 0.1);
  for (const Vec3& v : {Vec3{0.1, 0.2, 0}, Vec3{-1.5, 0.4, 0}}) {
    const Vec3 x{0.3, -0.2, 0};
    const auto p = evaluate_point(b.build(v), f, g, h, 0.0, x);
    CHECK(p.G2 == doctest::Approx(p.L2()).epsilon(1e-12));
    CHECK(p.G3 == doctest::Approx(p.L3()).epsilon(1e-12));
  }
}

TEST_CASE("grid sweeps agree with pointwise evaluation") {
  const PhaseGrid grid = small_grid();
  const CollisionOperators ops(grid, M, KernelConfig{}, QuadratureSpec{});
  const auto f = PhaseDensity::sample(grid, M, [](double t, const Vec3& x, const Vec3& v) {
    return 0.1 * (1 + 0.3 * t) * M(x, v) * (1 + 0.2 * std::sin(x[0] + v[1]));
  });
  const auto g = PhaseDensity::scaled_envelope(grid, M, 0.05);
  const auto R = ops.frequency(f, g);
  const auto G = ops.gain(f, g, f);
  for (int k = 0; k < grid.Nt(); ++k)
    for (std::size_t iv : {std::size_t{10}, std::size_t{24}, std::size_t{31}})
      for (std::size_t ix : {std::size_t{17}, std::size_t{24}, std::size_t{40}}) {
        const auto p = evaluate_point(ops.rules()[iv], density_fn(f), density_fn(f), density_fn(g), grid.time(k),
                                      grid.x_node(ix));
        const std::size_t i = grid.index(k, iv, ix);
        CHECK(R.binary[i] == doctest::Approx(p.R2).epsilon(1e-10));
        CHECK(R.ternary[i] == doctest::Approx(p.R3).epsilon(1e-10));
        const auto q = evaluate_point(ops.rules()[iv], density_fn(f), density_fn(g), density_fn(f), grid.time(k),
                                      grid.x_node(ix));
        CHECK(G.binary[i] == doctest::Approx(q.G2).epsilon(1e-10));
        CHECK(G.ternary[i] == doctest::Approx(q.G3).epsilon(1e-10));
      }
}

TEST_CASE("zero inputs, loss factorisation, linearity and monotonicity") {
  const PhaseGrid grid = small_grid();
  const CollisionOperators ops(grid, M, KernelConfig{}, QuadratureSpec{});
  const auto z = PhaseDensity::zero(grid, M);
  const auto a = PhaseDensity::scaled_envelope(grid, M, 0.1);
  const auto b = PhaseDensity::sample(grid, M, [](double, const Vec3& x, const Vec3& v) {
    return 0.05 * M(x, v) * (1.0 + 0.5 * std::cos(v[0]));
  });
  CHECK(max_abs(ops.frequency(z, z).total()) == 0.0);
  CHECK(max_abs(ops.gain(a, z, a).total()) == 0.0);

  const auto R = ops.frequency(b, a);
  const auto L = ops.loss(a, b, a);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(L.binary[i] == a.values()[i] * R.binary[i]);
    CHECK(L.ternary[i] == a.values()[i] * R.ternary[i]);
  }

  // G is linear in each argument; b <= a pointwise gives ordered outputs.
  const auto a2 = PhaseDensity::scaled_envelope(grid, M, 0.2);
  const auto G1 = ops.gain(a, b, b), G2 = ops.gain(a2, b, b), Gb = ops.gain(b, b, b);
  const auto Rb = ops.frequency(b, b);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(G2.binary[i] == doctest::Approx(2 * G1.binary[i]).epsilon(1e-13));
    CHECK(G2.ternary[i] == doctest::Approx(2 * G1.ternary[i]).epsilon(1e-13));
    CHECK(Gb.binary[i] <= G1.binary[i] * (1 + 1e-14));
    CHECK(Rb.ternary[i] <= R.ternary[i] * (1 + 1e-14));
  }
}

TEST_CASE("vanishing ternary density gives an exactly zero ternary part") {
  const PhaseGrid grid = small_grid();
  KernelConfig k;
  k.b3 = AngularDensity::zero();
  const CollisionOperators ops(grid, M, k, QuadratureSpec{});
  const auto a = PhaseDensity::scaled_envelope(grid, M, 0.1);
  const auto R = ops.frequency(a, a);
  const auto G = ops.gain(a, a, a);
  CHECK(max_abs(R.ternary) == 0.0);
  CHECK(max_abs(G.ternary) == 0.0);
  CHECK(max_abs(R.binary) > 0.0);
}

TEST_CASE("Monte Carlo rules agree with the convolution integrals") {
  // At t = 0, x = 0 with g = h = M, R2 = |b2| int |u| e^{-|v1|^2} and, for a
  // constant b3, R3 = b3 |S^3| int |u~| e^{-|v1|^2 - |v2|^2}.
  KernelConfig k;
  k.b3 = AngularDensity::constant(0.05);
  const Vec3 v{0.3, -0.2, 0};
  const double R2 = 2.0 * convolution_lhs(2, 1.0, 1.0, CollisionKind::binary, v);
  const double R3 = 0.05 * 2 * pi * pi * convolution_lhs(2, 1.0, 1.0, CollisionKind::ternary, v);
  const auto g = maxwellian_fn(M, 1.0);

  QuadratureSpec mc;
  mc.backend = Backend::monte_carlo;
  mc.n_mc = 256;
  mc.seed = 17;
  const RuleBuilder b(k, mc, 1.0);
  const int reps = 200;
  double s2 = 0, q2 = 0, s3 = 0, q3 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto p = evaluate_point(b.build(v, r), g, g, g, 0.0, {0, 0, 0});
    s2 += p.R2;
    q2 += p.R2 * p.R2;
    s3 += p.R3;
    q3 += p.R3 * p.R3;
  }
  const double m2 = s2 / reps, m3 = s3 / reps;
  const double se2 = std::sqrt((q2 / reps - m2 * m2) / reps), se3 = std::sqrt((q3 / reps - m3 * m3) / reps);
  CHECK(std::abs(m2 - R2) <= 4 * se2);
  CHECK(std::abs(m3 - R3) <= 4 * se3);
  CHECK(se2 < 0.01 * R2);
  // Different streams give different rules, the same stream the same one.
  CHECK(b.build(v, 1).gain2.front().vp != b.build(v, 2).gain2.front().vp);
  CHECK(b.build(v, 1).gain2.front().vp == b.build(v, 1).gain2.front().vp);
}

TEST_CASE("deterministic rules converge to the convolution integrals") {
  KernelConfig k;
  k.b3 = AngularDensity::constant(0.05);
  const Vec3 v{0.3, -0.2, 0};
  const double R2 = 2.0 * convolution_lhs(2, 1.0, 1.0, CollisionKind::binary, v);
  const double R3 = 0.05 * 2 * pi * pi * convolution_lhs(2, 1.0, 1.0, CollisionKind::ternary, v);
  const auto g = maxwellian_fn(M, 1.0);
  QuadratureSpec q;
  q.n_ang = 64;
  q.n_vel = 48;
  q.n_vel_ternary = 8;
  q.n_chi = 1;
  const auto p = evaluate_point(RuleBuilder(k, q, 1.0).build(v), g, g, g, 0.0, {0, 0, 0});
  CHECK(p.R2 == doctest::Approx(R2).epsilon(2e-3));  // slow: |u| has a kink
  CHECK(p.R3 == doctest::Approx(R3).epsilon(1e-2));
}

TEST_CASE("error estimate reports small relative differences for smooth data") {
  // Refinement differences are meaningful once interpolation is resolved.
  const PhaseGrid grid = PhaseGrid::from_envelope(2, M, 16, 16, 2, 1.0);
  const CollisionOperators ops(grid, M, KernelConfig{}, QuadratureSpec{});
  const auto a = PhaseDensity::scaled_envelope(grid, M, 0.1);
  SweepOptions opt;
  opt.estimate_error = true;
  opt.slices = {0};
  const auto R = ops.frequency(a, a, opt);
  CHECK(R.error_estimate >= 0.0);
  CHECK(R.error_estimate < 0.1);
  opt.tolerance = 1e-6;
  CHECK(ops.frequency(a, a, opt).flagged);
}

TEST_CASE("invalid quadrature and mismatched inputs") {
  QuadratureSpec q;
  q.n_ang = 7;
  CHECK(q.violations(2).size() == 1);
  q.n_ang = 8;
  q.n_mc = 1;
  CHECK(q.violations(2).size() == 1);
  q.n_mc = 16;
  CHECK(q.violations(3).size() == 1);  // deterministic is two-dimensional only
  CHECK_THROWS_AS(q.validate(3), InvalidInput);
  const PhaseGrid grid = small_grid();
  const CollisionOperators ops(grid, M, KernelConfig{}, QuadratureSpec{});
  const auto other = PhaseDensity::zero(grid.with_time(2, 1.0), M);
  CHECK_THROWS_AS(ops.frequency(other, other), InvalidInput);
}
