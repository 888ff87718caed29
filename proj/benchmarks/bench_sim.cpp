#include <benchmark/benchmark.h>

#include "switchlq/bsde.hpp"
#include "switchlq/sim.hpp"
#include "test_instances.hpp"

using namespace switchlq;

namespace {

struct Fixture {
  model::DecomposedModel dm;
  riccati::AreSolution are;
  sim::ControlLaw law;

  Fixture() : dm(model::decompose(testing::make_twostate(true))) {
    are = riccati::solve_are(dm);
    const bsde::Drivers drivers = bsde::assemble_drivers(dm, are.P1, are.P2, are.gains);
    const bsde::AdjointSolution adjoint = bsde::solve_adjoint(dm, are, drivers);
    law = sim::feedback_law(are, bsde::compute_offsets(dm, are, adjoint));
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

sim::SimConfig config(int paths, double horizon, double dt) {
  sim::SimConfig cfg;
  cfg.init.s = 0.5;
  cfg.init.regime = 0;
  cfg.init.xi2 = testing::col2(0.8, -0.4);
  cfg.init.xi1_coef = testing::col2(0.25, 0.15);
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.num_paths = paths;
  cfg.seed = 1;
  return cfg;
}

void BM_PathThroughput(benchmark::State& state) {
  const Fixture& f = fixture();
  const sim::SimConfig cfg = config(static_cast<int>(state.range(0)), 4.5, 1e-3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::estimate_cost(f.dm, f.law, cfg, f.are));
  }
  const int64_t steps_per_path = static_cast<int64_t>((cfg.horizon - cfg.init.s) / cfg.dt);
  state.SetItemsProcessed(state.iterations() * cfg.num_paths * steps_per_path);
}
BENCHMARK(BM_PathThroughput)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_CommonRandomNumbersPair(benchmark::State& state) {
  const Fixture& f = fixture();
  sim::ControlLaw bumped = f.law;
  for (auto& t : bumped.gains.theta1) t.array() += 0.05;
  const std::vector<sim::ControlLaw> laws{f.law, bumped};
  const sim::SimConfig cfg = config(50, 4.5, 1e-3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::crn_costs(f.dm, laws, cfg));
  }
}
BENCHMARK(BM_CommonRandomNumbersPair)->Unit(benchmark::kMillisecond);

void BM_ChainSampling(benchmark::State& state) {
  const Fixture& f = fixture();
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(chain::sample_path(f.dm.gen, 0.0, 0, 100.0, 1000 + i++));
  }
}
BENCHMARK(BM_ChainSampling);

}  // namespace

BENCHMARK_MAIN();
