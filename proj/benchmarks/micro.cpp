#include <benchmark/benchmark.h>

#include "bmamba/broad.hpp"
#include "bmamba/ssm.hpp"

using namespace bmamba;

namespace {

struct ConvFixture {
  ssm::DiscreteSSM disc;
  ssm::ConvKernel kernel;
  Matrix x;

  explicit ConvFixture(Index length) {
    Rng rng(7);
    disc = ssm::discretize_zoh(ssm::random_system(8, 8, rng));
    kernel = ssm::materialize_kernel(disc, length);
    x.resize(length, 8);
    fill_normal(x, 1.0, rng);
  }
};

void BM_ConvNaive(benchmark::State& state) {
  const ConvFixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ssm::causal_conv_naive(f.x, f.kernel, f.disc.D));
  state.SetComplexityN(state.range(0));
}

void BM_ConvFft(benchmark::State& state) {
  const ConvFixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ssm::causal_conv_fft(f.x, f.kernel, f.disc.D));
  state.SetComplexityN(state.range(0));
}

void BM_Scan(benchmark::State& state) {
  const ConvFixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ssm::scan(f.disc, f.x));
  state.SetComplexityN(state.range(0));
}

void BM_Kernel(benchmark::State& state) {
  const ConvFixture f(1);
  for (auto _ : state) benchmark::DoNotOptimize(ssm::materialize_kernel(f.disc, state.range(0)));
}

// Rows x (n*d_z + m*d_h) broad design at the default node counts.
void BM_RidgeSolve(benchmark::State& state) {
  Rng rng(3);
  Matrix F(state.range(0), 10 * 16 + 30 * 16), Y(state.range(0), 32);
  fill_normal(F, 1.0, rng);
  fill_normal(Y, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(broad::ridge_solve(F, Y, 1e-2));
}

}  // namespace

BENCHMARK(BM_ConvNaive)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_ConvFft)->RangeMultiplier(4)->Range(256, 65536)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_Scan)->RangeMultiplier(4)->Range(256, 65536)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_Kernel)->RangeMultiplier(4)->Range(256, 65536)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RidgeSolve)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
