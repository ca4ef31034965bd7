#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "miscon/backends.hpp"
#include "miscon/contrastive.hpp"
#include "miscon/dataset.hpp"
#include "miscon/fusion.hpp"

namespace miscon {

/// One run's complete configuration: input locations, backend wiring, and
/// hyperparameters. Loaded from a JSON file; relative paths (including
/// fixture endpoints) are resolved against the config file's directory, so a
/// run is reproducible from anywhere.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    std::filesystem::path dataset_csv;
    /// Instances for predict. Empty means: use the ingested records artifact.
    std::filesystem::path instances;
    std::filesystem::path templates_dir = "templates";
    std::filesystem::path output_dir = "out";

    IngestOptions ingest;
    /// Rejected-row budget for cmd_ingest; no limit when unset.
    std::optional<std::size_t> max_rejected_rows;

    std::optional<BackendDescriptor> embedder;
    std::optional<BackendDescriptor> reasoner;
    std::optional<BackendDescriptor> teacher;
    std::optional<BackendDescriptor> judge;
    std::optional<BackendDescriptor> reranker;

    std::size_t k = 10;
    double tau = 0.1;  // contrastive temperature
    MaskWeights mask_weights;
    std::size_t m_candidates = 4;
    std::size_t m_negatives = 3;
    double teacher_temperature = 0.8;
    FusionConfig fusion;
    std::vector<std::size_t> map_cutoffs = {1, 3, 5};
    bool exclude_self = false;

    static RunConfig load(const std::filesystem::path& path);

    /// Named backend or an InputError telling the user which config section
    /// is missing.
    const BackendDescriptor& require_backend(const std::optional<BackendDescriptor>& descriptor,
                                             const char* role) const;

    // Derived artifact locations, all under output_dir.
    std::filesystem::path records_path() const { return output_dir / "records.jsonl"; }
    std::filesystem::path rejections_path() const { return output_dir / "rejections.jsonl"; }
    std::filesystem::path index_path() const { return output_dir / "index.bin"; }
    std::filesystem::path index_manifest_path() const {
        return output_dir / "index.manifest.json";
    }
    std::filesystem::path distilled_path() const { return output_dir / "distilled.jsonl"; }
    std::filesystem::path distilled_sft_path() const {
        return output_dir / "distilled_sft.jsonl";
    }
    std::filesystem::path distill_failures_path() const {
        return output_dir / "distill_failures.jsonl";
    }
    std::filesystem::path verification_path() const { return output_dir / "verification.jsonl"; }
    std::filesystem::path verification_sft_path() const {
        return output_dir / "verification_sft.jsonl";
    }
    std::filesystem::path predictions_path() const { return output_dir / "predictions.jsonl"; }
    std::filesystem::path predictions_retrieval_path() const {
        return output_dir / "predictions.retrieval.jsonl";
    }
    std::filesystem::path predictions_reranking_path() const {
        return output_dir / "predictions.reranking.jsonl";
    }
    std::filesystem::path predict_failures_path() const {
        return output_dir / "predict_failures.jsonl";
    }
    std::filesystem::path report_text_path() const { return output_dir / "report.txt"; }
    std::filesystem::path report_json_path() const { return output_dir / "report.json"; }

    std::filesystem::path reasoner_template_path() const {
        return templates_dir / "reasoner_v1.txt";
    }
    std::filesystem::path judge_template_path() const { return templates_dir / "judge_v1.txt"; }
    std::filesystem::path verify_template_path() const {
        return templates_dir / "rerank_verify_v1.txt";
    }
};

}  // namespace miscon
