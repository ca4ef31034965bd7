// Scoring-path microbenchmarks: per-label max similarity over a dense index
// and the top-k cut. Sized to a realistic desk-scale corpus.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "miscon/label.hpp"
#include "miscon/retrieval.hpp"
#include "miscon/rng.hpp"

namespace {

using namespace miscon;

EmbeddingVector random_unit(SplitMix64& rng, std::size_t dim) {
    std::vector<double> values(dim);
    for (auto& v : values) v = rng.next_gaussian();
    EmbeddingVector vector(std::move(values));
    vector.normalize();
    return vector;
}

EmbeddedDataset make_index(std::size_t entries, std::size_t dim, std::size_t labels) {
    SplitMix64 rng(1337);
    std::vector<IndexEntry> index;
    index.reserve(entries);
    for (std::size_t i = 0; i < entries; ++i) {
        const std::string label =
            "False_Misconception:Bench_" + std::to_string(i % labels);
        index.push_back({random_unit(rng, dim), CompositeLabel::parse(label),
                         "inst_" + std::to_string(i)});
    }
    return EmbeddedDataset::from_entries(std::move(index), "bench");
}

void BM_score_labels(benchmark::State& state) {
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 64, 32);
    SplitMix64 rng(7);
    const EmbeddingVector query = random_unit(rng, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(score_labels(query, index));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_score_labels)->Arg(128)->Arg(1024)->Arg(8192);

void BM_top_k_labels(benchmark::State& state) {
    const auto index = make_index(4096, 64, static_cast<std::size_t>(state.range(0)));
    SplitMix64 rng(7);
    const EmbeddingVector query = random_unit(rng, 64);
    const LabelScoreTable table = score_labels(query, index);
    for (auto _ : state) {
        benchmark::DoNotOptimize(top_k_labels(table, 10));
    }
}
BENCHMARK(BM_top_k_labels)->Arg(32)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
