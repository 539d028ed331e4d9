#include <benchmark/benchmark.h>

#include "ksbt/collision_maps.hpp"
#include "ksbt/estimates.hpp"
#include "ksbt/operators.hpp"

using namespace ksbt;

namespace {

const Maxwellian M{1.0, 1.0};

void BM_BinaryMap(benchmark::State& st) {
  Rng rng = make_stream(1, 0);
  const Vec3 v = sample_velocity(3, rng), v1 = sample_velocity(3, rng), w = sample_direction(3, rng);
  for (auto _ : st) benchmark::DoNotOptimize(binary_map(v, v1, w));
}
BENCHMARK(BM_BinaryMap);

void BM_TernaryMap(benchmark::State& st) {
  Rng rng = make_stream(1, 0);
  const Vec3 v = sample_velocity(3, rng), v1 = sample_velocity(3, rng), v2 = sample_velocity(3, rng);
  const auto [o1, o2] = sample_direction_pair(3, rng);
  for (auto _ : st) benchmark::DoNotOptimize(ternary_map(v, v1, v2, o1, o2));
}
BENCHMARK(BM_TernaryMap);

// One time slice of the frequency / gain sweeps on an N^4 grid.
void BM_FrequencySweep(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const PhaseGrid g = PhaseGrid::from_envelope(2, M, n, n, 2, 1.0);
  const CollisionOperators ops(g, M, KernelConfig{}, QuadratureSpec{});
  const auto f = PhaseDensity::scaled_envelope(g, M, 0.1);
  SweepOptions opt;
  opt.slices = {1};
  for (auto _ : st) benchmark::DoNotOptimize(ops.frequency(f, f, opt));
}
BENCHMARK(BM_FrequencySweep)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GainSweep(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const PhaseGrid g = PhaseGrid::from_envelope(2, M, n, n, 2, 1.0);
  const CollisionOperators ops(g, M, KernelConfig{}, QuadratureSpec{});
  const auto f = PhaseDensity::scaled_envelope(g, M, 0.1);
  SweepOptions opt;
  opt.slices = {1};
  for (auto _ : st) benchmark::DoNotOptimize(ops.gain(f, f, f, opt));
}
BENCHMARK(BM_GainSweep)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ConvolutionLhs(benchmark::State& st) {
  const auto kind = st.range(0) == 2 ? CollisionKind::binary : CollisionKind::ternary;
  const Vec3 v{1.3, -0.4, 0.0};
  for (auto _ : st) benchmark::DoNotOptimize(convolution_lhs(2, 1.0, -0.9, kind, v));
}
BENCHMARK(BM_ConvolutionLhs)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
