#include "miscon/pipeline.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <utility>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"
#include "miscon/parallel.hpp"
#include "miscon/reasoning.hpp"

namespace miscon {

namespace {

/// Wraps a stage body so its errors carry the stage name and instance id.
template <typename Fn>
auto run_stage(const char* stage, const std::string& instance_id, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const BackendError& e) {
        throw StageError(stage, instance_id, e.what(), true);
    } catch (const Error& e) {
        throw StageError(stage, instance_id, e.what(), false);
    }
}

}  // namespace

Pipeline::Pipeline(const EmbeddedDataset& index, EmbeddingBackend& embedder,
                   CompletionBackend& reasoner, CompletionBackend& reranker,
                   PromptTemplate reasoner_prompt, PromptTemplate verify_prompt,
                   PipelineConfig config)
    : index_(index),
      embedder_(embedder),
      reasoner_(reasoner),
      reranker_(reranker),
      reasoner_prompt_(std::move(reasoner_prompt)),
      verify_prompt_(std::move(verify_prompt)),
      config_(std::move(config)) {
    if (config_.k < 1) throw InputError("pipeline k must be at least 1");
    config_.fusion.validate();
}

InstancePrediction Pipeline::predict(const QueryTriplet& instance) const {
    const std::string& id = instance.instance_id;

    EmbeddingVector query = run_stage("embed", id, [&] {
        EmbeddingVector vector = embedder_.embed({embedding_input_text(instance)}).front();
        vector.normalize();
        return vector;
    });

    const LabelScoreTable table = run_stage("retrieve", id, [&] {
        ScoreOptions options;
        if (config_.exclude_self) options.exclude_instance_id = id;
        LabelScoreTable scored = score_labels(query, index_, options);
        if (scored.empty()) {
            throw InputError("no index entries left to score (everything excluded)");
        }
        return scored;
    });
    const ScoredRanking retrieval_full = top_k_labels(table, table.size());
    const std::size_t head_size = std::min<std::size_t>(config_.k, retrieval_full.size());
    std::vector<ScoredItem> head_items(retrieval_full.items().begin(),
                                       retrieval_full.items().begin() + head_size);
    const ScoredRanking candidates(std::move(head_items));

    const ReasoningTrace reasoning = run_stage(
        "reason", id, [&] { return generate_reasoning(instance, reasoner_prompt_, reasoner_); });

    const ScoredRanking reranked = run_stage("rerank", id, [&] {
        return rerank_candidates(instance, reasoning, candidates, verify_prompt_, reranker_,
                                 config_.tokens);
    });

    const ScoredRanking fused = run_stage("fuse", id, [&] {
        const ScoredRanking fused_head = fuse(reranked, candidates, config_.fusion);
        std::vector<ScoredItem> items(fused_head.items());
        items.insert(items.end(), retrieval_full.items().begin() + head_size,
                     retrieval_full.items().end());
        return ScoredRanking(std::move(items));
    });

    InstancePrediction prediction;
    prediction.instance_id = id;
    prediction.retrieval = retrieval_full;
    prediction.reranking = reranked;
    prediction.fused = fused;
    return prediction;
}

Pipeline::BatchResult Pipeline::predict_batch(const std::vector<QueryTriplet>& instances,
                                              std::size_t workers) const {
    struct Slot {
        std::optional<InstancePrediction> prediction;
        std::optional<StageFailure> failure;
    };
    std::vector<Slot> slots(instances.size());

    parallel_for(instances.size(), workers, [&](std::size_t i) {
        try {
            slots[i].prediction = predict(instances[i]);
        } catch (const StageError& e) {
            slots[i].failure = StageFailure{e.instance_id(), e.stage(), e.what(),
                                            e.backend_fault()};
        }
    });

    BatchResult result;
    for (auto& slot : slots) {
        if (slot.prediction.has_value()) result.predictions.push_back(std::move(*slot.prediction));
        if (slot.failure.has_value()) result.failures.push_back(std::move(*slot.failure));
    }
    return result;
}

void Pipeline::write_failures(std::ostream& out, const std::vector<StageFailure>& failures) {
    for (const auto& failure : failures) {
        const nlohmann::json obj = {{"instance_id", failure.instance_id},
                                    {"stage", failure.stage},
                                    {"reason", failure.reason},
                                    {"backend_fault", failure.backend_fault}};
        out << obj.dump() << '\n';
    }
}

}  // namespace miscon
