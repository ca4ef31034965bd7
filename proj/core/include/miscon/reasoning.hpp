#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "miscon/backends.hpp"
#include "miscon/dataset.hpp"
#include "miscon/prompts.hpp"

namespace miscon {

/// One chain-of-thought analysis of one instance.
struct ReasoningTrace {
    std::string text;
    std::string instance_id;
    std::string producer;  // backend identifier
    std::optional<std::size_t> candidate_index;
    std::optional<double> judge_score;  // present iff distilled
};

struct CandidateSet {
    std::string instance_id;
    std::vector<ReasoningTrace> candidates;
};

struct JudgeVerdict {
    std::size_t candidate_index = 0;
    double score = 0.0;
    std::string rationale_text;  // the judge's raw reply
};

struct DistilledRecord {
    DatasetRecord record;
    ReasoningTrace reasoning;  // carries the winning judge_score
};

inline constexpr std::size_t kReasoningMaxTokens = 1024;
inline constexpr std::size_t kJudgeMaxTokens = 16;

/// Request builders are public so fixture files can be written with exactly
/// the bytes the engine will ask for.
CompletionRequest reasoning_request(const QueryTriplet& triplet, const PromptTemplate& prompt,
                                    const SamplingParams& sampling);
CompletionRequest judge_request(const DatasetRecord& record, std::string_view candidate_text,
                                const PromptTemplate& prompt);
/// The retry request after an unparsable judge reply: the raw reply is
/// appended as an assistant turn followed by a corrective user turn.
CompletionRequest judge_reprompt_request(CompletionRequest original, const std::string& raw_reply);

/// Deterministic (temperature 0) single-trace generation, used at predict
/// time. An empty completion is retried once, then surfaced as a
/// BackendError naming the instance.
ReasoningTrace generate_reasoning(const QueryTriplet& triplet, const PromptTemplate& prompt,
                                  CompletionBackend& reasoner);

/// Stochastic teacher sampling: m candidates with per-candidate seeds
/// derived from (seed, instance_id, candidate_index), so results do not
/// depend on scheduling.
CandidateSet generate_candidates(const DatasetRecord& record, const PromptTemplate& prompt,
                                 CompletionBackend& teacher, std::size_t m, std::uint64_t seed,
                                 double temperature = 0.8,
                                 std::size_t max_tokens = kReasoningMaxTokens);

/// Scores every candidate (the judge sees the ground-truth label verbatim)
/// and returns the argmax winner, ties to the lowest candidate index. The
/// winner carries its judge_score. A reply with no parsable leading number
/// anywhere in it is reprompted once, then rejected with the raw response in
/// the error.
std::pair<ReasoningTrace, std::vector<JudgeVerdict>> judge_candidates(
    const CandidateSet& set, const DatasetRecord& record, const PromptTemplate& judge_prompt,
    CompletionBackend& judge);

struct DistillationConfig {
    std::size_t candidates = 4;  // m
    std::uint64_t seed = 0;
    double teacher_temperature = 0.8;
    std::size_t max_tokens = kReasoningMaxTokens;
    std::size_t workers = 1;
};

struct DistillationFailure {
    std::string instance_id;
    std::string stage;  // "generate" or "judge"
    std::string reason;
    /// True when the underlying cause was a backend fault (transport,
    /// missing fixture, unusable model output) rather than bad input.
    bool backend_fault = false;
};

struct DistillationResult {
    std::vector<DistilledRecord> records;   // input order, failures omitted
    std::vector<DistillationFailure> failures;  // input order
};

/// The two-stage generate-then-judge pipeline over a whole dataset. Records
/// that ultimately fail are collected in the failure report instead of
/// aborting the run. Output is byte-identical for any worker count.
DistillationResult build_distilled_dataset(const std::vector<DatasetRecord>& records,
                                           const PromptTemplate& reasoner_prompt,
                                           const PromptTemplate& judge_prompt,
                                           CompletionBackend& teacher, CompletionBackend& judge,
                                           const DistillationConfig& config);

/// One JSON object per line:
/// {instance_id, question, answer, explanation, label, reasoning, judge_score}.
void write_distilled_jsonl(std::ostream& out, const std::vector<DistilledRecord>& records);
std::vector<DistilledRecord> read_distilled_jsonl(std::istream& in);
std::vector<DistilledRecord> read_distilled_file(const std::filesystem::path& path);

/// Conversational fine-tuning layout, one {system, user, assistant} object
/// per line: the reasoner prompt's turns with the winning trace as the
/// assistant reply.
void write_distilled_sft_jsonl(std::ostream& out, const std::vector<DistilledRecord>& records,
                               const PromptTemplate& reasoner_prompt);

/// {instance_id, stage, reason, backend_fault} per line.
void write_distillation_failures(std::ostream& out,
                                 const std::vector<DistillationFailure>& failures);

}  // namespace miscon
