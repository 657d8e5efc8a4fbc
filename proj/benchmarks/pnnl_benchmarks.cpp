#include "generators.hpp"
#include "pnnl/hyperopt.hpp"
#include "pnnl/progression.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

namespace {

using namespace pnnl;

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix a = testing::random_matrix(n, n, rng), b = testing::random_matrix(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_KMeans(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Matrix probs = softmax_rows(testing::random_matrix(n, 10, rng, -3, 3));
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(probs, 10, Rng(3)));
}
BENCHMARK(BM_KMeans)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

struct BlobFixture {
    Dataset data;
    DataSplit split;
    LabeledMatrix train, val;
};

const BlobFixture& blobs() {
    static const BlobFixture f = [] {
        BlobFixture b;
        b.data = testing::gaussian_blobs({.n = 5000, .dim = 32, .classes = 10, .seed = 4});
        b.split = split(b.data, {}, 4);
        b.data = standardize_fit_apply(b.data, b.split).dataset;
        b.train = materialize(b.data, b.split.train);
        b.val = materialize(b.data, b.split.val);
        return b;
    }();
    return f;
}

// One block optimization at subset fraction range(0)/100 of the training split.
void BM_OptimizeBlock(benchmark::State& state) {
    const BlobFixture& f = blobs();
    const double fraction = static_cast<double>(state.range(0)) / 100.0;
    ProgressionConfig cfg;
    cfg.subset_fraction = fraction;
    const std::size_t m = subset_size_for(cfg, f.train.size());
    const Subset subset = select_random(f.train.size(), m, Rng(5));
    Rng rng(6);
    Topology base(f.data.dim(), f.data.num_classes());
    base.start_new_layer(16, rng);
    base.freeze_all();
    base.add_block(16, rng);
    const HyperParams hp{.learning_rate = 0.01, .epochs = 5};
    for (auto _ : state) {
        Topology t = base;
        benchmark::DoNotOptimize(optimize_block(t, f.train, subset.indices, hp, Rng(7)));
    }
    state.counters["M"] = static_cast<double>(m);
}
BENCHMARK(BM_OptimizeBlock)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Selection(benchmark::State& state) {
    const BlobFixture& f = blobs();
    const auto strategy = static_cast<Strategy>(state.range(0));
    Rng rng(8);
    Topology t(f.data.dim(), f.data.num_classes());
    t.start_new_layer(16, rng);
    optimize_block(t, f.train, select_random(f.train.size(), 400, Rng(9)).indices, {.learning_rate = 0.01, .epochs = 3},
                   Rng(10));
    t.freeze_all();
    const std::size_t m = 400;
    for (auto _ : state) {
        if (strategy == Strategy::random) {
            benchmark::DoNotOptimize(select_random(f.train.size(), m, Rng(11)));
        } else {
            const SelectionContext ctx = compute_context(t, f.train.features, f.train.labels, Rng(11), 10);
            benchmark::DoNotOptimize(strategy == Strategy::top_loss ? select_top_loss(ctx, m)
                                                                    : select_cluster_top_loss(ctx, m));
        }
    }
    state.SetLabel(std::string(to_string(strategy)));
}
BENCHMARK(BM_Selection)
    ->Arg(static_cast<int>(Strategy::random))
    ->Arg(static_cast<int>(Strategy::top_loss))
    ->Arg(static_cast<int>(Strategy::cluster_top_loss))
    ->Unit(benchmark::kMillisecond);

void BM_CandidateGrid(benchmark::State& state) {
    const BlobFixture& f = blobs();
    Rng rng(12);
    Topology t(f.data.dim(), f.data.num_classes());
    t.start_new_layer(16, rng);
    const Subset subset = select_random(f.train.size(), 400, Rng(13));
    const HyperGrid grid = enumerate_grid({{0.01, 0.003}, {0.0, 1e-4}, {0.0, 0.2}, {5}});
    const std::size_t jobs = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(run_candidates(t, subset, grid, f.train, f.val, Rng(14), 1, {.jobs = jobs}));
}
BENCHMARK(BM_CandidateGrid)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
