#include "miscon/ranking.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "miscon/errors.hpp"

namespace miscon {

void sort_by_score(std::vector<ScoredItem>& items) {
    std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.label.canonical() < b.label.canonical();
    });
}

ScoredRanking::ScoredRanking(std::vector<ScoredItem> items_in_rank_order)
    : items_(std::move(items_in_rank_order)) {
    std::set<std::string> seen;
    for (const auto& item : items_) {
        if (!seen.insert(item.label.canonical()).second) {
            throw InputError("ranking contains label '" + item.label.canonical() + "' twice");
        }
    }
}

ScoredRanking ScoredRanking::by_score(std::vector<ScoredItem> items) {
    sort_by_score(items);
    return ScoredRanking(std::move(items));
}

std::size_t ScoredRanking::rank_of(const CompositeLabel& label) const {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (items_[i].label == label) return i + 1;
    }
    return 0;
}

std::vector<CompositeLabel> ScoredRanking::labels() const {
    std::vector<CompositeLabel> out;
    out.reserve(items_.size());
    for (const auto& item : items_) out.push_back(item.label);
    return out;
}

}  // namespace miscon
