#include "miscon/label.hpp"

#include <algorithm>

#include "miscon/errors.hpp"

namespace miscon {

std::string_view to_string(Correctness c) {
    return c == Correctness::True ? "True" : "False";
}

std::string_view to_string(ReasoningType r) {
    switch (r) {
        case ReasoningType::Correct: return "Correct";
        case ReasoningType::Misconception: return "Misconception";
        case ReasoningType::Neither: return "Neither";
    }
    return "Misconception";
}

namespace {

Correctness parse_correctness(std::string_view token, std::string_view full) {
    if (token == "True") return Correctness::True;
    if (token == "False") return Correctness::False;
    throw InputError("label '" + std::string(full) + "': unknown correctness '" +
                     std::string(token) + "' (expected True or False)");
}

ReasoningType parse_reasoning_type(std::string_view token, std::string_view full) {
    if (token == "Correct") return ReasoningType::Correct;
    if (token == "Misconception") return ReasoningType::Misconception;
    if (token == "Neither") return ReasoningType::Neither;
    throw InputError("label '" + std::string(full) + "': unknown reasoning_type '" +
                     std::string(token) + "' (expected Correct, Misconception or Neither)");
}

}  // namespace

CompositeLabel::CompositeLabel(Correctness c, ReasoningType r, std::string misconception)
    : correctness_(c), reasoning_type_(r), misconception_(std::move(misconception)) {
    canonical_.reserve(misconception_.size() + 24);
    canonical_.append(to_string(correctness_));
    canonical_.push_back('_');
    canonical_.append(to_string(reasoning_type_));
    canonical_.push_back(':');
    canonical_.append(misconception_);
}

CompositeLabel CompositeLabel::make(Correctness c, ReasoningType r, std::string misconception) {
    if (r == ReasoningType::Misconception) {
        if (misconception.empty() || misconception == kNoMisconception) {
            throw InputError(
                "hierarchy violation: reasoning_type Misconception requires a named "
                "misconception, got '" + misconception + "'");
        }
    } else {
        if (misconception.empty()) {
            misconception = kNoMisconception;
        } else if (misconception != kNoMisconception) {
            throw InputError("hierarchy violation: reasoning_type " +
                             std::string(to_string(r)) + " requires misconception NA, got '" +
                             misconception + "'");
        }
    }
    return CompositeLabel(c, r, std::move(misconception));
}

CompositeLabel CompositeLabel::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw InputError("malformed label '" + std::string(text) +
                         "': expected '<correctness>_<reasoning_type>:<misconception>'");
    }
    const std::string_view head = text.substr(0, colon);
    const std::string_view misconception = text.substr(colon + 1);
    const auto underscore = head.find('_');
    if (underscore == std::string_view::npos) {
        throw InputError("malformed label '" + std::string(text) +
                         "': expected '<correctness>_<reasoning_type>' before ':'");
    }
    const Correctness c = parse_correctness(head.substr(0, underscore), text);
    const ReasoningType r = parse_reasoning_type(head.substr(underscore + 1), text);
    return make(c, r, std::string(misconception));
}

LabelSpace LabelSpace::from_records(const std::vector<DatasetRecord>& records) {
    if (records.empty()) throw InputError("cannot build a label space from zero records");
    std::vector<CompositeLabel> labels;
    labels.reserve(records.size());
    for (const auto& rec : records) labels.push_back(rec.label);
    return from_labels(std::move(labels));
}

LabelSpace LabelSpace::from_labels(std::vector<CompositeLabel> labels) {
    if (labels.empty()) throw InputError("cannot build a label space from zero labels");
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    LabelSpace space;
    space.labels_ = std::move(labels);
    return space;
}

bool LabelSpace::contains(const CompositeLabel& label) const {
    return std::binary_search(labels_.begin(), labels_.end(), label);
}

}  // namespace miscon
