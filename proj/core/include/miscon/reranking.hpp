#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "miscon/backends.hpp"
#include "miscon/label.hpp"
#include "miscon/prompts.hpp"
#include "miscon/ranking.hpp"
#include "miscon/reasoning.hpp"

namespace miscon {

/// A fully rendered verification prompt for one (instance, candidate) pair.
struct VerificationPrompt {
    std::string rendered_text;
    std::map<std::string, std::string> slots;
    std::string template_name;

    /// The prompt's chat turns, ready for a completion request.
    std::vector<ChatMessage> messages() const;
};

struct TokenScore {
    double yes_logprob = 0.0;
    double no_logprob = 0.0;
};

/// First-token spellings accepted for each verdict.
struct RerankTokenConfig {
    std::vector<std::string> yes_variants = {"Yes", " Yes"};
    std::vector<std::string> no_variants = {"No", " No"};
};

/// Renders the verification template with the instance, the reasoning trace
/// as THOUGHT ANALYSIS, and the candidate label decomposed into its
/// correctness / reasoning-type / misconception slots.
VerificationPrompt build_prompt(const QueryTriplet& triplet, const ReasoningTrace& reasoning,
                                const CompositeLabel& candidate, const PromptTemplate& tmpl);

/// One-token completion scored for the pooled "Yes" and "No" first-token
/// log-probabilities. Throws BackendError when the backend cannot score the
/// tokens; a missing verdict token is an error, never a silent zero.
TokenScore score_candidate(const VerificationPrompt& prompt, CompletionBackend& reranker,
                           const RerankTokenConfig& tokens = {});

/// score_rerank = yes_logprob - no_logprob. Invariant under any common shift
/// of the two scores, so log-probabilities and raw logits rank identically.
double logit_margin(const TokenScore& score);

/// Scores every candidate and sorts by margin descending (ties by canonical
/// label ascending). Scores are raw margins; normalization happens at fusion.
/// Any per-candidate backend error aborts the whole instance.
ScoredRanking rerank_candidates(const QueryTriplet& triplet, const ReasoningTrace& reasoning,
                                const ScoredRanking& candidates, const PromptTemplate& tmpl,
                                CompletionBackend& reranker, const RerankTokenConfig& tokens = {});

/// m distinct labels from `space`, none equal to true_label, chosen by a
/// seeded partial Fisher-Yates shuffle over the canonical ordering.
std::vector<CompositeLabel> sample_negatives(const CompositeLabel& true_label,
                                             const LabelSpace& space, std::size_t m,
                                             std::uint64_t seed);

enum class VerifyTarget { Yes, No };
enum class ExampleOrigin { positive, negative };

std::string_view to_string(VerifyTarget target);
std::string_view to_string(ExampleOrigin origin);

struct AugmentedExample {
    VerificationPrompt prompt;
    VerifyTarget target = VerifyTarget::Yes;
    ExampleOrigin origin = ExampleOrigin::positive;
    std::string source_instance_id;
};

/// Per distilled record: one positive (true label -> Yes) followed by m
/// sampled negatives (-> No), groups in input order. Negative sampling is
/// seeded per record from (seed, instance_id), so the dataset does not
/// depend on processing order.
std::vector<AugmentedExample> build_verification_dataset(
    const std::vector<DistilledRecord>& distilled, const LabelSpace& space, std::size_t m,
    std::uint64_t seed, const PromptTemplate& tmpl);

/// Mean binary cross-entropy of predicted probability-of-Yes against the
/// targets, with probabilities clamped to [1e-12, 1 - 1e-12].
double rerank_cross_entropy(const std::vector<double>& predicted_yes,
                            const std::vector<VerifyTarget>& targets);

/// {instance_id, prompt, target, origin} per line.
void write_verification_jsonl(std::ostream& out, const std::vector<AugmentedExample>& examples);

/// Conversational layout {system, user, assistant} per line, assistant being
/// the verdict token.
void write_verification_sft_jsonl(std::ostream& out,
                                  const std::vector<AugmentedExample>& examples);

}  // namespace miscon
