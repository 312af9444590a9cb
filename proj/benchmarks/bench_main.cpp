#include <benchmark/benchmark.h>

#include "annulab/annulus.hpp"
#include "annulab/geodesic.hpp"
#include "annulab/numtheory.hpp"
#include "annulab/orbit_search.hpp"
#include "annulab/so3.hpp"

using namespace annulab;

static void BM_TotientSieve(benchmark::State& state) {
    for (auto _ : state) {
        auto phi = totient_sieve(static_cast<std::uint32_t>(state.range(0)));
        benchmark::DoNotOptimize(phi.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TotientSieve)->Range(1 << 12, 1 << 20)->Complexity();

static void BM_CumulativePhiWindow(benchmark::State& state) {
    FractionWindow w(Rational{-3, 10}, Rational{2, 5});
    for (auto _ : state) benchmark::DoNotOptimize(cumulative_phi(state.range(0), w));
}
BENCHMARK(BM_CumulativePhiWindow)->Range(1 << 8, 1 << 14);

static void BM_PerturbedLift(benchmark::State& state) {
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    LiftPoint z{0.123, 0.456};
    for (auto _ : state) {
        z = f->lift(z);
        z.x_tilde -= static_cast<long>(z.x_tilde);  // keep the coordinate bounded
        benchmark::DoNotOptimize(z);
    }
}
BENCHMARK(BM_PerturbedLift);

static void BM_FindOrbits13(benchmark::State& state) {
    auto f = make_perturbed_twist(-0.3, 0.4, standard_bump_hamiltonian(), 0.05);
    SolverParams sp;
    sp.grid_nx = static_cast<int>(state.range(0));
    sp.grid_ny = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto r = find_orbits(*f, 1, 3, sp);
        benchmark::DoNotOptimize(r.orbits.size());
    }
}
BENCHMARK(BM_FindOrbits13)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_GeodesicFlow(benchmark::State& state) {
    EllipsoidMetric m(1.0, 1.05, 1.1);
    TangentState x{{0.1, -0.55, 0.8}, {0.9, 0.2, 0.3}};
    m.project(x.q, x.v);
    for (auto _ : state) {
        auto y = geodesic_flow(m, x, 3.0);
        benchmark::DoNotOptimize(y.q[0]);
    }
}
BENCHMARK(BM_GeodesicFlow)->Unit(benchmark::kMillisecond);

static void BM_HalfReturn(benchmark::State& state) {
    FlowOptions fo;
    fo.rtol = 1e-10;
    fo.atol = 1e-12;
    GeodesicLab lab(EllipsoidMetric(1.0, 1.0, 1.92), 256, 1e-10, fo);
    SectionPoint x{1.0, 1.1};
    for (auto _ : state) {
        auto rec = lab.half_return(x);
        benchmark::DoNotOptimize(rec.end.s);
    }
}
BENCHMARK(BM_HalfReturn)->Unit(benchmark::kMillisecond);

static void BM_So3Battery(benchmark::State& state) {
    for (auto _ : state) {
        auto rep = so3_check(static_cast<int>(state.range(0)), 1);
        benchmark::DoNotOptimize(rep.homomorphism_worst);
    }
}
BENCHMARK(BM_So3Battery)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
