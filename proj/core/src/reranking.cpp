#include "miscon/reranking.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"
#include "miscon/rng.hpp"

namespace miscon {

using json = nlohmann::json;

std::vector<ChatMessage> VerificationPrompt::messages() const {
    const ChatMarkup markup = parse_chat_markup(rendered_text);
    if (!markup.ends_with_assistant_cue) {
        throw InputError("verification prompt from template '" + template_name +
                         "' does not end with an assistant generation cue");
    }
    return markup.messages;
}

VerificationPrompt build_prompt(const QueryTriplet& triplet, const ReasoningTrace& reasoning,
                                const CompositeLabel& candidate, const PromptTemplate& tmpl) {
    if (reasoning.text.empty()) {
        throw InputError("cannot build a verification prompt without reasoning for instance '" +
                         triplet.instance_id + "'");
    }
    VerificationPrompt prompt;
    prompt.slots = {{"q_text", triplet.question_text},
                    {"mc_answer", triplet.chosen_answer},
                    {"explanation", triplet.explanation},
                    {"correctness", std::string(to_string(candidate.correctness()))},
                    {"reasoning_type", std::string(to_string(candidate.reasoning_type()))},
                    {"misconception", candidate.misconception()},
                    {"thought", reasoning.text}};
    prompt.rendered_text = tmpl.render(prompt.slots);
    prompt.template_name = tmpl.name();
    return prompt;
}

TokenScore score_candidate(const VerificationPrompt& prompt, CompletionBackend& reranker,
                           const RerankTokenConfig& tokens) {
    CompletionRequest request;
    request.messages = prompt.messages();
    request.sampling.temperature = 0.0;
    request.sampling.seed = 0;
    request.sampling.max_tokens = 1;
    request.logprob_targets = {{"Yes", tokens.yes_variants}, {"No", tokens.no_variants}};

    const CompletionResponse response = reranker.complete(request);
    const auto yes = response.first_token_logprobs.find("Yes");
    const auto no = response.first_token_logprobs.find("No");
    if (yes == response.first_token_logprobs.end() || no == response.first_token_logprobs.end()) {
        throw BackendError("reranker backend did not score both verdict tokens");
    }
    return {yes->second, no->second};
}

double logit_margin(const TokenScore& score) { return score.yes_logprob - score.no_logprob; }

ScoredRanking rerank_candidates(const QueryTriplet& triplet, const ReasoningTrace& reasoning,
                                const ScoredRanking& candidates, const PromptTemplate& tmpl,
                                CompletionBackend& reranker, const RerankTokenConfig& tokens) {
    if (candidates.empty()) {
        throw InputError("rerank_candidates needs at least one candidate label");
    }
    std::vector<ScoredItem> items;
    items.reserve(candidates.size());
    for (const auto& item : candidates.items()) {
        const VerificationPrompt prompt = build_prompt(triplet, reasoning, item.label, tmpl);
        const TokenScore score = score_candidate(prompt, reranker, tokens);
        items.push_back({item.label, logit_margin(score)});
    }
    return ScoredRanking::by_score(std::move(items));
}

std::vector<CompositeLabel> sample_negatives(const CompositeLabel& true_label,
                                             const LabelSpace& space, std::size_t m,
                                             std::uint64_t seed) {
    std::vector<CompositeLabel> pool;
    pool.reserve(space.size());
    for (const auto& label : space.labels()) {
        if (!(label == true_label)) pool.push_back(label);
    }
    if (pool.size() < m) {
        throw InputError("label space has only " + std::to_string(pool.size()) +
                         " labels besides the true one, cannot sample " + std::to_string(m) +
                         " negatives");
    }
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(m), pool.end());
    return pool;
}

std::string_view to_string(VerifyTarget target) {
    return target == VerifyTarget::Yes ? "Yes" : "No";
}

std::string_view to_string(ExampleOrigin origin) {
    return origin == ExampleOrigin::positive ? "positive" : "negative";
}

std::vector<AugmentedExample> build_verification_dataset(
    const std::vector<DistilledRecord>& distilled, const LabelSpace& space, std::size_t m,
    std::uint64_t seed, const PromptTemplate& tmpl) {
    std::vector<AugmentedExample> examples;
    examples.reserve(distilled.size() * (m + 1));
    for (const auto& record : distilled) {
        const std::string& instance_id = record.record.triplet.instance_id;

        AugmentedExample positive;
        positive.prompt =
            build_prompt(record.record.triplet, record.reasoning, record.record.label, tmpl);
        positive.target = VerifyTarget::Yes;
        positive.origin = ExampleOrigin::positive;
        positive.source_instance_id = instance_id;
        examples.push_back(std::move(positive));

        const std::uint64_t record_seed = derive_seed(seed, instance_id);
        for (const auto& negative_label :
             sample_negatives(record.record.label, space, m, record_seed)) {
            AugmentedExample negative;
            negative.prompt =
                build_prompt(record.record.triplet, record.reasoning, negative_label, tmpl);
            negative.target = VerifyTarget::No;
            negative.origin = ExampleOrigin::negative;
            negative.source_instance_id = instance_id;
            examples.push_back(std::move(negative));
        }
    }
    return examples;
}

double rerank_cross_entropy(const std::vector<double>& predicted_yes,
                            const std::vector<VerifyTarget>& targets) {
    if (predicted_yes.empty()) throw InputError("cross-entropy needs at least one example");
    if (predicted_yes.size() != targets.size()) {
        throw InputError("cross-entropy got " + std::to_string(predicted_yes.size()) +
                         " probabilities for " + std::to_string(targets.size()) + " targets");
    }
    constexpr double kEpsilon = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < predicted_yes.size(); ++i) {
        double p = predicted_yes[i];
        if (!std::isfinite(p)) {
            throw InputError("predicted probability " + std::to_string(i) + " is not finite");
        }
        p = std::min(std::max(p, kEpsilon), 1.0 - kEpsilon);
        total += targets[i] == VerifyTarget::Yes ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(predicted_yes.size());
}

void write_verification_jsonl(std::ostream& out, const std::vector<AugmentedExample>& examples) {
    for (const auto& example : examples) {
        const json obj = {{"instance_id", example.source_instance_id},
                          {"prompt", example.prompt.rendered_text},
                          {"target", std::string(to_string(example.target))},
                          {"origin", std::string(to_string(example.origin))}};
        out << obj.dump() << '\n';
    }
}

void write_verification_sft_jsonl(std::ostream& out,
                                  const std::vector<AugmentedExample>& examples) {
    for (const auto& example : examples) {
        std::string system_text;
        std::string user_text;
        for (const auto& message : example.prompt.messages()) {
            if (message.role == "system") system_text = message.content;
            if (message.role == "user") user_text = message.content;
        }
        const json obj = {{"system", system_text},
                          {"user", user_text},
                          {"assistant", std::string(to_string(example.target))}};
        out << obj.dump() << '\n';
    }
}

}  // namespace miscon
