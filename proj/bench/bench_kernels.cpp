// Serial reference against the OpenMP path for the Monte Carlo kernels and a
// small replicate sweep. On one core the two should be within noise.

#include "chordchurn/experiment.hpp"
#include "chordchurn/oracles.hpp"

#include <benchmark/benchmark.h>

using namespace chordchurn;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_ShareOracle(benchmark::State& state)
{
    const oracle::RingModel ring{1000, 20};
    for (auto _ : state) benchmark::DoNotOptimize(oracle::share(ring, 16, 50000, 1, exec_of(state)));
    state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_ShareOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_StaticLookupOracle(benchmark::State& state)
{
    const oracle::RingModel ring{256, 12};
    for (auto _ : state) benchmark::DoNotOptimize(oracle::static_lookup_hops(ring, 5000, 1, exec_of(state)));
    state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_StaticLookupOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state)
{
    SweepSpec s;
    s.r = {200, 500};
    s.alpha = {0.5};
    s.n0 = 200;
    s.bits = 14;
    s.replicates = 4;
    s.burnin_events = 20000;
    s.measure_events = 20000;
    s.probe_lookups_per_sample = 20;
    for (auto _ : state) benchmark::DoNotOptimize(run_sweep(s, exec_of(state)));
    state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
