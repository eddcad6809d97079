#include "cytocoset/evaluation.hpp"
#include "cytocoset/rff.hpp"
#include "cytocoset/setnet.hpp"
#include "cytocoset/training.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cytocoset;

namespace {

RowMatrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = normal(rng);
    }
    return m;
}

void BM_TransformCells(benchmark::State& state) {
    RffConfig cfg;
    cfg.d = static_cast<int>(state.range(1));
    const auto proj = make_projection(30, cfg);
    const auto X = normal_matrix(state.range(0), 30, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(transform_cells(X, proj));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TransformCells)->Args({1000, 128})->Args({10000, 128})->Args({1000, 2048});

void BM_PoolSignature(benchmark::State& state) {
    const auto Z = normal_matrix(state.range(0), 128, 2);
    const auto pooling = state.range(1) == 0 ? Pooling::Median : Pooling::Max;
    for (auto _ : state) {
        benchmark::DoNotOptimize(pool_signature(Z, pooling, "s"));
    }
}
BENCHMARK(BM_PoolSignature)->Args({10000, 0})->Args({10000, 1});

SetEncoderConfig bench_net() {
    SetEncoderConfig cfg;
    cfg.input_dim = 30;
    cfg.block_widths = {64, 64};
    cfg.embed_dim = 32;
    cfg.set_size = 128;
    cfg.seed = 3;
    return cfg;
}

void BM_Forward(benchmark::State& state) {
    const auto params = init_params(bench_net());
    const auto X = normal_matrix(128, 30, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, X));
    }
}
BENCHMARK(BM_Forward);

void BM_ForwardBackward(benchmark::State& state) {
    const auto params = init_params(bench_net());
    const auto X = normal_matrix(128, 30, 5);
    Gradients grads(params.config());
    for (auto _ : state) {
        const auto out = forward(params, X);
        backward(params, X, out.trace, 0.3, {}, grads);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_ForwardBackward);

void BM_RocAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = unif(rng);
        labels[i] = static_cast<int>(i % 2);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(roc_auc(scores, labels));
    }
}
BENCHMARK(BM_RocAuc)->Arg(50)->Arg(10000);

}

BENCHMARK_MAIN();
