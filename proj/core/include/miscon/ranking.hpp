#pragma once

#include <cstddef>
#include <vector>

#include "miscon/label.hpp"

namespace miscon {

struct ScoredItem {
    CompositeLabel label;
    double score = 0.0;
};

/// Orders items by score descending; equal scores fall back to canonical
/// label ascending so the result never depends on input order.
void sort_by_score(std::vector<ScoredItem>& items);

/// A ranking over distinct labels, best first. The stored order is the
/// ranking: stages that mix score scales (fused head plus raw-score tail)
/// produce positions that a global sort would not reconstruct.
class ScoredRanking {
public:
    ScoredRanking() = default;

    /// Takes items already in rank order. Rejects duplicate labels.
    explicit ScoredRanking(std::vector<ScoredItem> items_in_rank_order);

    /// Builds a ranking by sorting the given scores (score desc, label asc).
    static ScoredRanking by_score(std::vector<ScoredItem> items);

    const std::vector<ScoredItem>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    /// 1-based rank of the label, or 0 when the label is absent.
    std::size_t rank_of(const CompositeLabel& label) const;

    std::vector<CompositeLabel> labels() const;

private:
    std::vector<ScoredItem> items_;
};

}  // namespace miscon
