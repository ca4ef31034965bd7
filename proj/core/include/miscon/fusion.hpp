#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "miscon/label.hpp"
#include "miscon/ranking.hpp"

namespace miscon {

/// Ensemble weights: fused = alpha * p_rerank + beta * p_retrieve over the
/// softmax-normalized per-module scores.
struct FusionConfig {
    double alpha = 0.7;
    double beta = 0.3;

    void validate() const;  // both >= 0 and finite, alpha + beta > 0
};

/// Softmax with max-subtraction. Output is positive and sums to 1.
std::vector<double> softmax_normalize(const std::vector<double>& scores);

/// Fuses two rankings over exactly the same label set: each score vector is
/// softmax-normalized over that set (in canonical label order, so the result
/// does not depend on input ordering), combined with (alpha, beta), and
/// re-sorted with standard tie-breaking.
ScoredRanking fuse(const ScoredRanking& rerank, const ScoredRanking& retrieve,
                   const FusionConfig& config);

/// Per-instance average precision at cutoff m: 1/j when the truth sits at
/// rank j <= m, else 0.
double map_at_m(const ScoredRanking& ranking, const CompositeLabel& truth, std::size_t m);

/// One instance's rankings from each stage of the pipeline.
struct StagePredictions {
    std::string instance_id;
    ScoredRanking retrieval;
    ScoredRanking reranking;
    ScoredRanking fused;
};

struct TruthRow {
    std::string instance_id;
    CompositeLabel truth;
};

struct EvalReport {
    struct Row {
        std::string stage;            // retrieval | reranking | fused
        std::vector<double> map_at;   // aligned with m_values
    };

    std::vector<std::size_t> m_values;
    std::vector<Row> rows;
    std::size_t instance_count = 0;
};

/// Aggregate MAP@m per stage: the arithmetic mean of per-instance scores,
/// accumulated in instance-id-sorted order so the result is reproducible.
/// Predictions and truths must cover exactly the same instance ids; the
/// first offending id is named in the error.
EvalReport evaluate(const std::vector<StagePredictions>& predictions,
                    const std::vector<TruthRow>& truths,
                    const std::vector<std::size_t>& m_values);

/// Fixed-width text table, one row per stage, one MAP@m column per m.
std::string format_report_table(const EvalReport& report);

/// Machine-readable twin of the table.
void write_report_json(std::ostream& out, const EvalReport& report);

/// One prediction per line: {instance_id, ranked: [labels], scores: [reals]}.
/// Positions are the ranking; rows mixing fused and appended-tail scores are
/// not globally sorted by score.
struct PredictionRow {
    std::string instance_id;
    ScoredRanking ranking;
};

void write_predictions_jsonl(std::ostream& out, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_jsonl(std::istream& in);
std::vector<PredictionRow> read_predictions_file(const std::filesystem::path& path);

}  // namespace miscon
