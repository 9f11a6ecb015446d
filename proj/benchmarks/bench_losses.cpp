#include <benchmark/benchmark.h>

#include <random>

#include "mvlift/losses.hpp"
#include "test_helpers.hpp"

using namespace mvlift;
using namespace mvlift::test;

namespace {

BatchFixture bench_batch(int n_samples) {
    std::mt19937_64 rng(9);
    BatchFixture fix = make_consistent_batch(n_samples, 4, 16, rng);
    perturb_predictions(fix.batch, 20.0, rng);
    return fix;
}

}  // namespace

static void BM_LossInput(benchmark::State& state) {
    BatchFixture fix = bench_batch(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_input_triangulation(fix.batch, fix.rig, fix.options));
    }
}
BENCHMARK(BM_LossInput)->Arg(64)->Arg(256);

static void BM_LossReprojection(benchmark::State& state) {
    BatchFixture fix = bench_batch(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_reprojection(fix.batch, fix.rig, fix.options));
    }
}
BENCHMARK(BM_LossReprojection)->Arg(64)->Arg(256);

static void BM_LossOutputTriangulation(benchmark::State& state) {
    BatchFixture fix = bench_batch(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_output_triangulation(fix.batch, fix.rig, fix.options));
    }
}
BENCHMARK(BM_LossOutputTriangulation)->Arg(64)->Arg(256);

static void BM_TotalObjective(benchmark::State& state) {
    BatchFixture fix = bench_batch(static_cast<int>(state.range(0)));
    const LossWeights weights;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            total_objective(fix.batch, fix.rig, weights, true, fix.options));
    }
}
BENCHMARK(BM_TotalObjective)->Arg(64)->Arg(256);
