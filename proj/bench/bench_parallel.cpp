#include <benchmark/benchmark.h>

#include "lbe/grid.hpp"
#include "lbe/sim.hpp"
#include "lbe/sweep.hpp"

using namespace lbe;

namespace {

SimConfig bench_config() {
    SimConfig c;
    c.model.lambda = 0.05;
    c.horizon = 20.0;
    c.checkpoints = uniform_checkpoints(c.horizon, 10);
    c.seed = 17;
    return c;
}

void BM_EnsembleSerial(benchmark::State& st) {
    const SimConfig c = bench_config();
    for (auto _ : st) benchmark::DoNotOptimize(run_ensemble_serial(c, st.range(0)).summary.t.size());
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_EnsembleParallel(benchmark::State& st) {
    const SimConfig c = bench_config();
    for (auto _ : st) benchmark::DoNotOptimize(run_ensemble(c, st.range(0), 0).summary.t.size());
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_GridBuild(benchmark::State& st) {
    ModelParams mp;
    mp.lambda = 0.3;
    GridSpec spec;
    spec.n_x = 4;
    spec.n_p = 16;
    spec.samples_per_cell = 200;
    for (auto _ : st)
        benchmark::DoNotOptimize(build_grid_chain(mp, PotentialSpec::cosine(1.0), spec, 3, static_cast<int>(st.range(0))).pi.sum());
}

void BM_KernelSweep(benchmark::State& st) {
    SweepOptions o;
    o.only = {"escape_growth", "drift_linear", "qvar_linear", "even_moment_m2"};
    for (auto _ : st) benchmark::DoNotOptimize(run_inequality_sweeps(o).pass);
}

}  // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleParallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridBuild)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelSweep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
