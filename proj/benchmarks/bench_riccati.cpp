#include <benchmark/benchmark.h>

#include "switchlq/riccati.hpp"
#include "switchlq/stability.hpp"
#include "test_instances.hpp"

using namespace switchlq;

namespace {

void BM_SolveStationaryScalar(benchmark::State& state) {
  const model::DecomposedModel dm = model::decompose(testing::make_scalar_control());
  for (auto _ : state) {
    benchmark::DoNotOptimize(riccati::solve_are(dm));
  }
}
BENCHMARK(BM_SolveStationaryScalar)->Unit(benchmark::kMillisecond);

void BM_SolveStationaryCoupled(benchmark::State& state) {
  const model::DecomposedModel dm = model::decompose(testing::make_twostate(false));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riccati::solve_are(dm));
  }
}
BENCHMARK(BM_SolveStationaryCoupled)->Unit(benchmark::kMillisecond);

void BM_GainIterationCoupled(benchmark::State& state) {
  const model::DecomposedModel dm = model::decompose(testing::make_twostate(false));
  const stability::Gains zero = stability::Gains::zero(2, 1, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(riccati::newton_kleinman(dm, zero));
  }
}
BENCHMARK(BM_GainIterationCoupled)->Unit(benchmark::kMillisecond);

void BM_FiniteHorizonStep(benchmark::State& state) {
  const model::DecomposedModel dm = model::decompose(testing::make_twostate(false));
  const double T = static_cast<double>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riccati::integrate_finite_horizon(dm, T, 2e-3));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(T / 2e-3));
}
BENCHMARK(BM_FiniteHorizonStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
