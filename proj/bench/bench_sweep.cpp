// Serial against OpenMP for the closure build, one sweep and a grid evaluation.
#include "pwedge/solver.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace pwedge;

namespace {

const SpectralData& seeded()
{
    static const SpectralData d = [] {
        const cplx k1(1.0, 0.4);
        SolverConfig s;
        s.base_grids = false;
        SpectralData d = seed(ProblemConfig::make(k1, 1.05 * k1, 1.2 * kPi), s);
        d.refresh();
        return d;
    }();
    return d;
}

const Closure& closure()
{
    static const Closure c = build_closure(seeded(), true);
    return c;
}

void BM_build_closure(benchmark::State& st)
{
    const bool par = st.range(0);
    for (auto _ : st) benchmark::DoNotOptimize(build_closure(seeded(), par).M.data());
    st.SetLabel(par ? "omp" : "serial");
    st.counters["threads"] = par ? omp_get_max_threads() : 1;
}

void BM_iterate_once(benchmark::State& st)
{
    const bool par = st.range(0);
    SpectralData d = seeded();
    for (auto _ : st) benchmark::DoNotOptimize(iterate_once(d, closure(), 0.7, par));
    st.SetLabel(par ? "omp" : "serial");
}

void BM_grid_eval(benchmark::State& st)
{
    const bool par = st.range(0);
    const SpectralData& d = seeded();
    std::vector<cplx> z;
    for (int i = 0; i < 200; ++i) z.emplace_back(-3 + 0.03 * i, 0.2);
    const Axis A = axis_from(z, d.cfg);
    for (auto _ : st) benchmark::DoNotOptimize(grid_eval(Formula::F1Single, A, A, d, Quantity::Psi, par).value.data());
    st.SetLabel(par ? "omp" : "serial");
}

}  // namespace

BENCHMARK(BM_build_closure)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_iterate_once)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_grid_eval)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
