// Serial observation-level bootstrap against the grouped OpenMP kernel.
#include <benchmark/benchmark.h>

#include "donutrd/elasticity.hpp"
#include "donutrd/synth.hpp"

using namespace donutrd;

namespace {

const Cohort& cohort() {
  static const Cohort c = [] {
    CohortParams p = calibrated_params();
    p.seed = 20240601;
    return simulate_cohort(p);
  }();
  return c;
}

void BM_reference(benchmark::State& state) {
  const int reps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(bootstrap_ped_reference(cohort(), PedSpecs{}, reps, 7));
  state.SetItemsProcessed(state.iterations() * reps);
}

void BM_grouped_serial(benchmark::State& state) {
  const int reps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        bootstrap_ped(cohort(), PedSpecs{}, reps, 7, Execution::serial));
  state.SetItemsProcessed(state.iterations() * reps);
}

void BM_grouped_parallel(benchmark::State& state) {
  const int reps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        bootstrap_ped(cohort(), PedSpecs{}, reps, 7, Execution::parallel));
  state.SetItemsProcessed(state.iterations() * reps);
}

}  // namespace

BENCHMARK(BM_reference)->Arg(499)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_grouped_serial)->Arg(499)->Arg(1999)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_grouped_parallel)->Arg(499)->Arg(1999)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
