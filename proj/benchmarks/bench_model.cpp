#include <benchmark/benchmark.h>

#include <random>

#include "mvlift/model.hpp"

using namespace mvlift;

namespace {

Eigen::MatrixXd random_input(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
}

}  // namespace

static void BM_ForwardEval(benchmark::State& state) {
    ModelConfig config;
    config.n_landmarks = 16;
    config.width = static_cast<int>(state.range(0));
    ModelParams params = init_params(config, 1);
    params.mode = Mode::Eval;
    const Eigen::MatrixXd input = random_input(256, config.input_dim(), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_eval(params, input));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardEval)->Arg(128)->Arg(1024);

static void BM_ForwardBackward(benchmark::State& state) {
    ModelConfig config;
    config.n_landmarks = 16;
    config.width = static_cast<int>(state.range(0));
    ModelParams params = init_params(config, 3);
    const Eigen::MatrixXd input = random_input(256, config.input_dim(), 4);
    const Eigen::MatrixXd upstream = random_input(256, config.output_dim(), 5);
    ForwardCache cache;
    for (auto _ : state) {
        forward(params, input, &cache);
        benchmark::DoNotOptimize(backward(params, cache, upstream));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(1024);
