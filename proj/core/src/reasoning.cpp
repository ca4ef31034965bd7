#include "miscon/reasoning.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"
#include "miscon/parallel.hpp"
#include "miscon/rng.hpp"

namespace miscon {

using json = nlohmann::json;

namespace {

std::vector<ChatMessage> render_to_messages(const PromptTemplate& prompt,
                                            const std::map<std::string, std::string>& values) {
    const ChatMarkup markup = parse_chat_markup(prompt.render(values));
    if (!markup.ends_with_assistant_cue) {
        throw InputError("template '" + prompt.name() +
                         "' does not end with an assistant generation cue");
    }
    return markup.messages;
}

/// First parsable number anywhere in the text, or nullopt.
std::optional<double> first_number(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool digit = c >= '0' && c <= '9';
        const bool sign_before_digit = (c == '-' || c == '+') && i + 1 < text.size() &&
                                       text[i + 1] >= '0' && text[i + 1] <= '9';
        if (!digit && !sign_before_digit) continue;
        double value = 0.0;
        const auto result = std::from_chars(text.data() + i, text.data() + text.size(), value);
        if (result.ec == std::errc{}) return value;
    }
    return std::nullopt;
}

std::string completion_with_retry_on_empty(CompletionBackend& backend,
                                           const CompletionRequest& request,
                                           const std::string& instance_id,
                                           const std::string& what) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        const CompletionResponse response = backend.complete(request);
        if (!response.text.empty()) return response.text;
    }
    throw BackendError(what + " returned an empty completion twice for instance '" + instance_id +
                       "'");
}

}  // namespace

CompletionRequest reasoning_request(const QueryTriplet& triplet, const PromptTemplate& prompt,
                                    const SamplingParams& sampling) {
    CompletionRequest request;
    request.messages = render_to_messages(prompt, {{"q_text", triplet.question_text},
                                                   {"mc_answer", triplet.chosen_answer},
                                                   {"explanation", triplet.explanation}});
    request.sampling = sampling;
    return request;
}

CompletionRequest judge_request(const DatasetRecord& record, std::string_view candidate_text,
                                const PromptTemplate& prompt) {
    CompletionRequest request;
    request.messages =
        render_to_messages(prompt, {{"q_text", record.triplet.question_text},
                                    {"mc_answer", record.triplet.chosen_answer},
                                    {"explanation", record.triplet.explanation},
                                    {"label", record.label.canonical()},
                                    {"candidate", std::string(candidate_text)}});
    request.sampling.temperature = 0.0;
    request.sampling.seed = 0;
    request.sampling.max_tokens = kJudgeMaxTokens;
    return request;
}

CompletionRequest judge_reprompt_request(CompletionRequest original, const std::string& raw_reply) {
    original.messages.push_back({"assistant", raw_reply});
    original.messages.push_back(
        {"user",
         "Your previous reply could not be parsed as a numeric score. Reply with a single number "
         "from 0 to 10."});
    return original;
}

ReasoningTrace generate_reasoning(const QueryTriplet& triplet, const PromptTemplate& prompt,
                                  CompletionBackend& reasoner) {
    SamplingParams sampling;
    sampling.temperature = 0.0;
    sampling.seed = 0;
    sampling.max_tokens = kReasoningMaxTokens;
    const CompletionRequest request = reasoning_request(triplet, prompt, sampling);

    ReasoningTrace trace;
    trace.text =
        completion_with_retry_on_empty(reasoner, request, triplet.instance_id, "reasoner");
    trace.instance_id = triplet.instance_id;
    trace.producer = reasoner.id();
    return trace;
}

CandidateSet generate_candidates(const DatasetRecord& record, const PromptTemplate& prompt,
                                 CompletionBackend& teacher, std::size_t m, std::uint64_t seed,
                                 double temperature, std::size_t max_tokens) {
    if (m < 1) throw InputError("candidate count m must be at least 1");

    CandidateSet set;
    set.instance_id = record.triplet.instance_id;
    set.candidates.reserve(m);
    for (std::size_t index = 0; index < m; ++index) {
        SamplingParams sampling;
        sampling.temperature = temperature;
        sampling.seed = derive_seed(seed, record.triplet.instance_id, index);
        sampling.max_tokens = max_tokens;
        const CompletionRequest request = reasoning_request(record.triplet, prompt, sampling);

        ReasoningTrace trace;
        trace.text = completion_with_retry_on_empty(
            teacher, request, record.triplet.instance_id,
            "teacher (candidate " + std::to_string(index) + ")");
        trace.instance_id = record.triplet.instance_id;
        trace.producer = teacher.id();
        trace.candidate_index = index;
        set.candidates.push_back(std::move(trace));
    }
    return set;
}

std::pair<ReasoningTrace, std::vector<JudgeVerdict>> judge_candidates(
    const CandidateSet& set, const DatasetRecord& record, const PromptTemplate& judge_prompt,
    CompletionBackend& judge) {
    if (set.candidates.empty()) throw InputError("cannot judge an empty candidate set");

    std::vector<JudgeVerdict> verdicts;
    verdicts.reserve(set.candidates.size());
    for (std::size_t index = 0; index < set.candidates.size(); ++index) {
        const CompletionRequest request =
            judge_request(record, set.candidates[index].text, judge_prompt);
        std::string reply = judge.complete(request).text;
        std::optional<double> score = first_number(reply);
        if (!score.has_value()) {
            reply = judge.complete(judge_reprompt_request(request, reply)).text;
            score = first_number(reply);
        }
        if (!score.has_value()) {
            throw BackendError("judge reply for instance '" + set.instance_id + "' candidate " +
                               std::to_string(index) +
                               " has no parsable score; raw response: \"" + reply + "\"");
        }
        if (!std::isfinite(*score)) {
            throw BackendError("judge score for instance '" + set.instance_id + "' candidate " +
                               std::to_string(index) + " is not finite");
        }
        verdicts.push_back({index, *score, std::move(reply)});
    }

    std::size_t winner_index = 0;
    for (std::size_t i = 1; i < verdicts.size(); ++i) {
        if (verdicts[i].score > verdicts[winner_index].score) winner_index = i;
    }
    ReasoningTrace winner = set.candidates[winner_index];
    winner.judge_score = verdicts[winner_index].score;
    return {std::move(winner), std::move(verdicts)};
}

DistillationResult build_distilled_dataset(const std::vector<DatasetRecord>& records,
                                           const PromptTemplate& reasoner_prompt,
                                           const PromptTemplate& judge_prompt,
                                           CompletionBackend& teacher, CompletionBackend& judge,
                                           const DistillationConfig& config) {
    struct Slot {
        std::optional<DistilledRecord> record;
        std::optional<DistillationFailure> failure;
    };
    std::vector<Slot> slots(records.size());

    parallel_for(records.size(), config.workers, [&](std::size_t i) {
        const DatasetRecord& record = records[i];
        const char* stage = "generate";
        try {
            const CandidateSet set =
                generate_candidates(record, reasoner_prompt, teacher, config.candidates,
                                    config.seed, config.teacher_temperature, config.max_tokens);
            stage = "judge";
            auto [winner, verdicts] = judge_candidates(set, record, judge_prompt, judge);
            slots[i].record = DistilledRecord{record, std::move(winner)};
        } catch (const BackendError& e) {
            slots[i].failure =
                DistillationFailure{record.triplet.instance_id, stage, e.what(), true};
        } catch (const Error& e) {
            slots[i].failure =
                DistillationFailure{record.triplet.instance_id, stage, e.what(), false};
        }
    });

    DistillationResult result;
    for (auto& slot : slots) {
        if (slot.record.has_value()) result.records.push_back(std::move(*slot.record));
        if (slot.failure.has_value()) result.failures.push_back(std::move(*slot.failure));
    }
    return result;
}

void write_distilled_jsonl(std::ostream& out, const std::vector<DistilledRecord>& records) {
    for (const auto& distilled : records) {
        if (!distilled.reasoning.judge_score.has_value()) {
            throw InputError("distilled record for instance '" +
                             distilled.record.triplet.instance_id + "' has no judge score");
        }
        const json obj = {{"instance_id", distilled.record.triplet.instance_id},
                          {"question", distilled.record.triplet.question_text},
                          {"answer", distilled.record.triplet.chosen_answer},
                          {"explanation", distilled.record.triplet.explanation},
                          {"label", distilled.record.label.canonical()},
                          {"reasoning", distilled.reasoning.text},
                          {"judge_score", *distilled.reasoning.judge_score}};
        out << obj.dump() << '\n';
    }
}

std::vector<DistilledRecord> read_distilled_jsonl(std::istream& in) {
    std::vector<DistilledRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        try {
            const json obj = json::parse(line);
            QueryTriplet triplet;
            triplet.instance_id = obj.at("instance_id").get<std::string>();
            triplet.question_text = obj.at("question").get<std::string>();
            triplet.chosen_answer = obj.at("answer").get<std::string>();
            triplet.explanation = obj.value("explanation", std::string{});
            ReasoningTrace trace;
            trace.text = obj.at("reasoning").get<std::string>();
            trace.instance_id = triplet.instance_id;
            trace.judge_score = obj.at("judge_score").get<double>();
            if (trace.text.empty()) {
                throw InputError("distilled line " + std::to_string(line_no) +
                                 ": reasoning text is empty");
            }
            DatasetRecord record{std::move(triplet),
                                 CompositeLabel::parse(obj.at("label").get<std::string>())};
            records.push_back({std::move(record), std::move(trace)});
        } catch (const json::exception& e) {
            throw InputError("distilled line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::vector<DistilledRecord> read_distilled_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open distilled file '" + path.string() + "'");
    return read_distilled_jsonl(in);
}

void write_distilled_sft_jsonl(std::ostream& out, const std::vector<DistilledRecord>& records,
                               const PromptTemplate& reasoner_prompt) {
    for (const auto& distilled : records) {
        const std::vector<ChatMessage> messages =
            render_to_messages(reasoner_prompt, {{"q_text", distilled.record.triplet.question_text},
                                                 {"mc_answer", distilled.record.triplet.chosen_answer},
                                                 {"explanation", distilled.record.triplet.explanation}});
        std::string system_text;
        std::string user_text;
        for (const auto& message : messages) {
            if (message.role == "system") system_text = message.content;
            if (message.role == "user") user_text = message.content;
        }
        const json obj = {{"system", system_text},
                          {"user", user_text},
                          {"assistant", distilled.reasoning.text}};
        out << obj.dump() << '\n';
    }
}

void write_distillation_failures(std::ostream& out,
                                 const std::vector<DistillationFailure>& failures) {
    for (const auto& failure : failures) {
        const json obj = {{"instance_id", failure.instance_id},
                          {"stage", failure.stage},
                          {"reason", failure.reason},
                          {"backend_fault", failure.backend_fault}};
        out << obj.dump() << '\n';
    }
}

}  // namespace miscon
