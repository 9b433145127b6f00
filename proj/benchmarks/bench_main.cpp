#include <benchmark/benchmark.h>

#include "dna/config.hpp"
#include "dna/eval.hpp"
#include "dna/membank.hpp"
#include "dna/objective.hpp"
#include "dna/rng.hpp"
#include "dna/trainer.hpp"

#include <numeric>

using namespace dna;

namespace {

Matrix unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
    return m;
}

void BM_TopK(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const FeatureBank bank(unit_rows(n, 16, 1), std::vector<int>(n, 0));
    const Matrix q = unit_rows(1, 16, 2);
    for (auto _ : state) benchmark::DoNotOptimize(topk_neighbors(bank, Index{0}, row_span(q, 0), 60));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TopK)->Arg(1440)->Arg(10000);

void BM_DnaLoss(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix bank = unit_rows(n, 16, 3);
    const Matrix q = unit_rows(128, 16, 4);
    Rng rng(5);
    std::vector<IndexList> pos(128);
    for (auto& p : pos)
        for (int j = 0; j < 30; ++j) p.push_back(rng.below(n));
    for (auto _ : state) benchmark::DoNotOptimize(dna_loss(q, pos, bank, 0.07));
}
BENCHMARK(BM_DnaLoss)->Arg(1440)->Arg(10000);

void BM_KMeans(benchmark::State& state) {
    const Matrix x = unit_rows(static_cast<std::size_t>(state.range(0)), 16, 6);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 30, 7, KMeansSettings{1, 300, 1e-6}));
}
BENCHMARK(BM_KMeans)->Arg(360)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_EStep(benchmark::State& state) {
    RunConfig cfg;
    const Dataset ds = generate(cfg.data);
    const CoarseView view(ds.train, ds.num_coarse);
    cfg.train.pretrain_epochs = 0;
    RunState st = start_run(view, cfg.train);
    for (auto _ : state) benchmark::DoNotOptimize(e_step(st, view, cfg.train, 0));
}
BENCHMARK(BM_EStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
