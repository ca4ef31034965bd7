// Loss and gradient cost on desk-scale contrastive batches. The gradient is
// the training hot path; the loss alone is what the toy trainer logs.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "miscon/contrastive.hpp"
#include "miscon/label.hpp"
#include "miscon/rng.hpp"

namespace {

using namespace miscon;

ContrastiveBatch make_batch(std::size_t n, std::size_t dim) {
    SplitMix64 rng(99);
    ContrastiveBatch batch;
    batch.temperature = 0.1;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> values(dim);
        for (auto& v : values) v = rng.next_gaussian();
        EmbeddingVector vector(std::move(values));
        vector.normalize();
        batch.embeddings.push_back(std::move(vector));
        batch.labels.push_back(CompositeLabel::parse("False_Misconception:Bench_" +
                                                     std::to_string(i % 8)));
    }
    return batch;
}

void BM_mask_supcon_loss(benchmark::State& state) {
    const auto batch = make_batch(static_cast<std::size_t>(state.range(0)), 64);
    const SoftMask mask = SoftMask::build(batch.labels);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mask_supcon_loss(batch, mask));
    }
}
BENCHMARK(BM_mask_supcon_loss)->Arg(16)->Arg(64)->Arg(128);

void BM_mask_supcon_gradient(benchmark::State& state) {
    const auto batch = make_batch(static_cast<std::size_t>(state.range(0)), 64);
    const SoftMask mask = SoftMask::build(batch.labels);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mask_supcon_gradient(batch, mask));
    }
}
BENCHMARK(BM_mask_supcon_gradient)->Arg(16)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
