// Serial reference against the OpenMP path for the per-probe kernels.

#include "cubicderiv/certify.hpp"

#include <benchmark/benchmark.h>

using namespace cubicderiv;

namespace {

struct Setup {
    TriangularExample ex = build_triangular(builtin_algebra("mat2-complex"), 7);
    ProbeSet probes = make_probes(ex.algebra->space, ProbeConfig{.count = 200});
    MapExpr f = make();

    MapExpr make() const {
        PerturbationSpec p;
        p.kind = PerturbationKind::PowerDecay;
        p.epsilon = 0.1;
        p.r = 1.0;
        p.seed = 11;
        return make_perturbed_map(triangular_derivation(ex), p);
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void BM_ResidualSweep(benchmark::State& state) {
    const Setup& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(residual_sweep(s.f, s.probes, exec_of(state)));
}

void BM_MeasureDelta(benchmark::State& state) {
    const Setup& s = setup();
    const auto phi = ControlFunction::power(1.0, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(measure_delta(s.f, phi, s.probes, {.forward_chain = 48}, exec_of(state)));
}

void BM_DirectForward(benchmark::State& state) {
    const Setup& s = setup();
    const auto phi = ControlFunction::power(0.05, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(direct_forward(s.f, phi, s.probes, 1e-10, {.exec = exec_of(state)}));
}

void BM_FixedPoint(benchmark::State& state) {
    const Setup& s = setup();
    const auto phi = ControlFunction::power(0.05, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(fixed_point_recover(s.f, phi, s.probes, 1e-10, {.exec = exec_of(state)}));
}

}  // namespace

// Arg 0: serial, 1: parallel
BENCHMARK(BM_ResidualSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeasureDelta)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DirectForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FixedPoint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
