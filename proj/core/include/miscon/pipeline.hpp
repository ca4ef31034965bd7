#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "miscon/backends.hpp"
#include "miscon/fusion.hpp"
#include "miscon/prompts.hpp"
#include "miscon/ranking.hpp"
#include "miscon/reranking.hpp"
#include "miscon/retrieval.hpp"

namespace miscon {

struct PipelineConfig {
    std::size_t k = 10;
    FusionConfig fusion;
    RerankTokenConfig tokens;
    /// Skip the index entry with the query's own instance_id while scoring
    /// (leave-one-out on training folds).
    bool exclude_self = false;
};

/// Stage failure recorded for one instance of a batch.
struct StageFailure {
    std::string instance_id;
    std::string stage;
    std::string reason;
    bool backend_fault = false;
};

/// Full per-instance output: the retrieval ranking over the whole label
/// space, the rerank margins over Y_k, and the fused ranking (fused head
/// over Y_k, remaining labels appended in retrieval order with their raw
/// retrieval scores).
struct InstancePrediction {
    std::string instance_id;
    ScoredRanking retrieval;
    ScoredRanking reranking;
    ScoredRanking fused;
};

/// Runs embed -> retrieve -> reason -> rerank -> fuse for query instances
/// against an immutable index. Failures are reported as StageError with the
/// stage name and instance id attached.
class Pipeline {
public:
    Pipeline(const EmbeddedDataset& index, EmbeddingBackend& embedder,
             CompletionBackend& reasoner, CompletionBackend& reranker,
             PromptTemplate reasoner_prompt, PromptTemplate verify_prompt, PipelineConfig config);

    InstancePrediction predict(const QueryTriplet& instance) const;

    struct BatchResult {
        std::vector<InstancePrediction> predictions;  // input order, failures omitted
        std::vector<StageFailure> failures;           // input order
    };

    /// predict() for each instance across `workers` threads. Output order
    /// and bytes do not depend on the worker count.
    BatchResult predict_batch(const std::vector<QueryTriplet>& instances,
                              std::size_t workers) const;

    /// {instance_id, stage, reason, backend_fault} per line.
    static void write_failures(std::ostream& out, const std::vector<StageFailure>& failures);

private:
    const EmbeddedDataset& index_;
    EmbeddingBackend& embedder_;
    CompletionBackend& reasoner_;
    CompletionBackend& reranker_;
    PromptTemplate reasoner_prompt_;
    PromptTemplate verify_prompt_;
    PipelineConfig config_;
};

}  // namespace miscon
