#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace miscon {

enum class Correctness { True, False };
enum class ReasoningType { Correct, Misconception, Neither };

std::string_view to_string(Correctness c);
std::string_view to_string(ReasoningType r);

/// Sentinel for "no misconception". Required whenever the reasoning type is
/// Correct or Neither, forbidden when it is Misconception.
inline constexpr std::string_view kNoMisconception = "NA";

/// Three-level label: answer correctness, explanation reasoning type, and the
/// named misconception. Construction is the only entry point, so an instance
/// always satisfies the hierarchy invariants.
///
/// Canonical text form: `<correctness>_<reasoning_type>:<misconception>`,
/// e.g. `False_Misconception:Incomplete` or `True_Correct:NA`.
class CompositeLabel {
public:
    /// Validating constructor. For Correct/Neither, an empty misconception is
    /// normalized to "NA". Throws InputError naming the violated invariant.
    static CompositeLabel make(Correctness c, ReasoningType r, std::string misconception);

    /// Parses the canonical text form. Throws InputError on grammar or
    /// hierarchy violations. parse(l.canonical()) == l for every valid label.
    static CompositeLabel parse(std::string_view text);

    Correctness correctness() const noexcept { return correctness_; }
    ReasoningType reasoning_type() const noexcept { return reasoning_type_; }
    const std::string& misconception() const noexcept { return misconception_; }
    bool has_misconception() const noexcept { return reasoning_type_ == ReasoningType::Misconception; }
    const std::string& canonical() const noexcept { return canonical_; }

    friend bool operator==(const CompositeLabel& a, const CompositeLabel& b) {
        return a.canonical_ == b.canonical_;
    }
    friend std::strong_ordering operator<=>(const CompositeLabel& a, const CompositeLabel& b) {
        return a.canonical_ <=> b.canonical_;
    }

private:
    CompositeLabel(Correctness c, ReasoningType r, std::string misconception);

    Correctness correctness_;
    ReasoningType reasoning_type_;
    std::string misconception_;
    std::string canonical_;
};

/// One student response instance: the question, the selected multiple-choice
/// answer, and the free-text explanation.
struct QueryTriplet {
    std::string instance_id;
    std::string question_text;
    std::string chosen_answer;
    std::string explanation;
};

struct DatasetRecord {
    QueryTriplet triplet;
    CompositeLabel label;
};

/// Deduplicated label set, ordered by canonical form ascending.
class LabelSpace {
public:
    /// Collects the distinct labels of `records`. Throws InputError on empty input.
    static LabelSpace from_records(const std::vector<DatasetRecord>& records);
    static LabelSpace from_labels(std::vector<CompositeLabel> labels);

    const std::vector<CompositeLabel>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool contains(const CompositeLabel& label) const;

private:
    std::vector<CompositeLabel> labels_;
};

}  // namespace miscon
