// Fusion and evaluation costs. Both are per-instance post-processing, so
// they should stay far below the backend call latency they sit next to.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "miscon/fusion.hpp"
#include "miscon/label.hpp"
#include "miscon/rng.hpp"

namespace {

using namespace miscon;

ScoredRanking make_ranking(std::size_t labels, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<ScoredItem> items;
    items.reserve(labels);
    for (std::size_t i = 0; i < labels; ++i) {
        items.push_back({CompositeLabel::parse("False_Misconception:Bench_" + std::to_string(i)),
                         -5.0 + 10.0 * rng.next_unit()});
    }
    return ScoredRanking(std::move(items));
}

void BM_softmax_normalize(benchmark::State& state) {
    SplitMix64 rng(3);
    std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
    for (auto& s : scores) s = -5.0 + 10.0 * rng.next_unit();
    for (auto _ : state) {
        benchmark::DoNotOptimize(softmax_normalize(scores));
    }
}
BENCHMARK(BM_softmax_normalize)->Arg(10)->Arg(100)->Arg(1000);

void BM_fuse(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ScoredRanking rerank = make_ranking(n, 1);
    const ScoredRanking retrieve = make_ranking(n, 2);
    const FusionConfig config;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse(rerank, retrieve, config));
    }
}
BENCHMARK(BM_fuse)->Arg(5)->Arg(25)->Arg(100);

void BM_evaluate(benchmark::State& state) {
    const auto instances = static_cast<std::size_t>(state.range(0));
    const CompositeLabel truth = CompositeLabel::parse("False_Misconception:Bench_0");
    std::vector<StagePredictions> predictions;
    std::vector<TruthRow> truths;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::string id = "inst_" + std::to_string(i);
        const ScoredRanking ranking = make_ranking(25, i);
        predictions.push_back({id, ranking, ranking, ranking});
        truths.push_back({id, truth});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate(predictions, truths, {1, 3, 5}));
    }
    state.SetItemsProcessed(state.iterations() * instances);
}
BENCHMARK(BM_evaluate)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
