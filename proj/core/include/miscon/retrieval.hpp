#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "miscon/backends.hpp"
#include "miscon/dataset.hpp"
#include "miscon/embedding.hpp"
#include "miscon/ranking.hpp"

namespace miscon {

/// Serialization of a (question, answer, explanation) triplet for the
/// embedding backend. Part of the fixture-key contract: changing this text
/// invalidates every recorded embedding fixture.
std::string embedding_input_text(const QueryTriplet& triplet);

struct IndexEntry {
    EmbeddingVector embedding;
    CompositeLabel label;
    std::string source_instance_id;
};

/// Label-level similarity scores. std::map keeps iteration in canonical label
/// order, which downstream folds rely on for reproducibility.
using LabelScoreTable = std::map<CompositeLabel, double>;

/// The embedded training corpus. Immutable once built; concurrent readers
/// need no synchronization.
class EmbeddedDataset {
public:
    /// Embeds every record (order-preserving) and L2-normalizes the vectors.
    /// Backend failures are rethrown with the offending instance_id attached.
    static EmbeddedDataset build(const std::vector<DatasetRecord>& records,
                                 EmbeddingBackend& embedder, std::size_t workers = 1);

    /// Assembles a dataset from prebuilt entries (used by load and by tests).
    /// Vectors must already be unit length.
    static EmbeddedDataset from_entries(std::vector<IndexEntry> entries, std::string embedder_id);

    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& embedder_id() const noexcept { return embedder_id_; }

    /// Distinct labels present in the index, canonical order.
    std::vector<CompositeLabel> labels() const;

    /// Writes the binary index and a human-readable JSON manifest.
    void save(const std::filesystem::path& index_path,
              const std::filesystem::path& manifest_path) const;

    /// Reads an index written by save(). The manifest is informational and
    /// not needed for loading.
    static EmbeddedDataset load(const std::filesystem::path& index_path);

private:
    EmbeddedDataset() = default;

    std::vector<IndexEntry> entries_;
    std::size_t dimension_ = 0;
    std::string embedder_id_;
};

struct ScoreOptions {
    /// When non-empty, index entries with this source_instance_id are skipped
    /// (leave-one-out evaluation on training folds). A label whose every
    /// entry is excluded drops out of the resulting table.
    std::string exclude_instance_id;
};

/// Per-label score: the maximum query similarity over the label's entries,
/// accumulated in index order with a plain left-to-right fold. The query must
/// be unit length.
LabelScoreTable score_labels(const EmbeddingVector& query, const EmbeddedDataset& index,
                             const ScoreOptions& options = {});

/// Top min(k, |table|) labels by score descending, ties broken by canonical
/// label ascending. The result for k is always a prefix of the result for
/// k + 1.
ScoredRanking top_k_labels(const LabelScoreTable& table, std::size_t k);

}  // namespace miscon
