#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "fedsim/bwo.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

const std::vector<LayerSpec> kArch = {LayerSpec{32, 128, Activation::relu},
                                      LayerSpec{128, 64, Activation::relu},
                                      LayerSpec{64, 4, Activation::identity}};

Batch make_bench_batch(std::size_t n, std::size_t dim, int classes, Rng& rng) {
    Batch b;
    b.features = MatF(n, dim);
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            b.features(i, j) = static_cast<float>(rng.uniform());
        b.labels[i] = static_cast<std::int32_t>(rng.uniform_int(0, classes - 1));
    }
    return b;
}

void BM_forward(benchmark::State& state) {
    Rng rng(1);
    const ParamVector params = init_params(kArch, rng);
    const Batch batch = make_bench_batch(static_cast<std::size_t>(state.range(0)), 32, 4, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, batch));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward)->Arg(10)->Arg(100);

void BM_loss_and_grad(benchmark::State& state) {
    Rng rng(2);
    const ParamVector params = init_params(kArch, rng);
    const Batch batch = make_bench_batch(10, 32, 4, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_and_grad(params, batch));
    }
}
BENCHMARK(BM_loss_and_grad);

void BM_train_epoch(benchmark::State& state) {
    Rng rng(3);
    const Dataset ds = make_synthetic(200, 32, 4, 6.0, 7);
    std::vector<std::int32_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    const DatasetView view{&ds, idx};
    const ParamVector params = init_params(kArch, rng);
    for (auto _ : state) {
        Rng train_rng(4);
        benchmark::DoNotOptimize(train_epochs(params, view, 1, 0.01, 10, train_rng));
    }
    state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_train_epoch);

void BM_sphere_search(benchmark::State& state) {
    BwoParams params;
    params.population_size = 8;
    params.max_iterations = static_cast<int>(state.range(0));
    params.init_spread = 2.0;
    params.mutation_scale = 0.1;
    const FitnessFn sphere = benchmark_function("sphere");
    for (auto _ : state) {
        Rng rng(5);
        benchmark::DoNotOptimize(bwo_optimize(sphere, 10, params, rng));
    }
}
BENCHMARK(BM_sphere_search)->Arg(5)->Arg(50);

void BM_parse_records(benchmark::State& state) {
    Rng rng(6);
    const auto records = static_cast<std::size_t>(state.range(0));
    std::vector<std::uint8_t> bytes(records * 3073);
    for (std::size_t r = 0; r < records; ++r) {
        bytes[r * 3073] = static_cast<std::uint8_t>(rng.uniform_int(0, 9));
        for (std::size_t i = 1; i < 3073; ++i)
            bytes[r * 3073 + i] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_cifar10(bytes));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_parse_records)->Arg(100);

void BM_aggregate(benchmark::State& state) {
    Rng rng(8);
    std::vector<WeightedUpdate> updates;
    for (int k = 0; k < 10; ++k) {
        ParamVector p = init_params(kArch, rng);
        updates.push_back({std::move(p), 200});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(aggregate_weighted(updates));
    }
}
BENCHMARK(BM_aggregate);

} // namespace

BENCHMARK_MAIN();
