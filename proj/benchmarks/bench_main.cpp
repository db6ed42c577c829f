// bench_main.cpp - Microbenchmarks of the hot paths.

#include <benchmark/benchmark.h>

#include "tagflow/deform.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/objective.hpp"
#include "tagflow/parallel.hpp"
#include "tagflow/phantom.hpp"

using namespace tagflow;

namespace {

PhantomPair phantom(std::size_t n) {
    PhantomConfig c;
    c.geometry = cube_geometry(n);
    const double mid = 0.5 * static_cast<double>(n - 1);
    c.tissue.center = {mid, mid, mid};
    c.tissue.semi_axes = {0.34 * n, 0.31 * n, 0.28 * n};
    return make_phantom_pair(c);
}

void BM_IntegrateVelocity(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const VectorField v = make_divergence_free_velocity(cube_geometry(n), 2.0, 1, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate_velocity({v, kDefaultSquaringSteps}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_TotalLoss(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PhantomPair p = phantom(n);
    const HarpTrio f = harp_trio(p.fixed, {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}, 6.0);
    const HarpTrio m = harp_trio(p.moving, {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}, 6.0);
    const VelocityParam v{make_divergence_free_velocity(cube_geometry(n), 1.0, 1, 2), kDefaultSquaringSteps};
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_loss(f.sincos, m.sincos, f.combined_magnitude, v, LossWeights{}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_HarpFilter(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PhantomPair p = phantom(n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(harp_filter(p.fixed[0], {1.0, 0.0, 0.0}, 6.0));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

} // namespace

BENCHMARK(BM_IntegrateVelocity)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TotalLoss)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HarpFilter)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
