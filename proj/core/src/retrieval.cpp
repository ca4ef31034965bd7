#include "miscon/retrieval.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"
#include "miscon/parallel.hpp"

namespace miscon {

using json = nlohmann::json;

std::string embedding_input_text(const QueryTriplet& triplet) {
    return "Question: " + triplet.question_text + "\nAnswer: " + triplet.chosen_answer +
           "\nExplanation: " + triplet.explanation;
}

EmbeddedDataset EmbeddedDataset::build(const std::vector<DatasetRecord>& records,
                                       EmbeddingBackend& embedder, std::size_t workers) {
    if (records.empty()) throw InputError("cannot build an index from an empty record list");

    std::vector<std::optional<IndexEntry>> slots(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) {
        const DatasetRecord& record = records[i];
        std::vector<EmbeddingVector> vectors;
        try {
            vectors = embedder.embed({embedding_input_text(record.triplet)});
        } catch (const BackendError& e) {
            throw BackendError("embedding failed for instance '" + record.triplet.instance_id +
                               "': " + e.what());
        }
        EmbeddingVector vector = std::move(vectors.front());
        try {
            vector.normalize();
        } catch (const InputError& e) {
            throw InputError("instance '" + record.triplet.instance_id + "': " + e.what());
        }
        slots[i] = IndexEntry{std::move(vector), record.label, record.triplet.instance_id};
    });

    std::vector<IndexEntry> entries;
    entries.reserve(slots.size());
    for (auto& slot : slots) entries.push_back(std::move(*slot));

    const std::size_t dimension = entries.front().embedding.dimension();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].embedding.dimension() != dimension) {
            throw BackendError("dimension mismatch at record " + std::to_string(i + 1) +
                               " (instance '" + records[i].triplet.instance_id + "'): got " +
                               std::to_string(entries[i].embedding.dimension()) + ", expected " +
                               std::to_string(dimension));
        }
    }

    EmbeddedDataset dataset;
    dataset.entries_ = std::move(entries);
    dataset.dimension_ = dimension;
    dataset.embedder_id_ = embedder.id();
    return dataset;
}

EmbeddedDataset EmbeddedDataset::from_entries(std::vector<IndexEntry> entries,
                                              std::string embedder_id) {
    if (entries.empty()) throw InputError("an embedded dataset must have at least one entry");
    const std::size_t dimension = entries.front().embedding.dimension();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].embedding.dimension() != dimension) {
            throw InputError("entry " + std::to_string(i + 1) + " has dimension " +
                             std::to_string(entries[i].embedding.dimension()) + ", expected " +
                             std::to_string(dimension));
        }
        if (!entries[i].embedding.is_unit()) {
            throw InputError("entry " + std::to_string(i + 1) + " (instance '" +
                             entries[i].source_instance_id + "') is not unit length");
        }
    }
    EmbeddedDataset dataset;
    dataset.entries_ = std::move(entries);
    dataset.dimension_ = dimension;
    dataset.embedder_id_ = std::move(embedder_id);
    return dataset;
}

std::vector<CompositeLabel> EmbeddedDataset::labels() const {
    std::vector<CompositeLabel> all;
    all.reserve(entries_.size());
    for (const auto& entry : entries_) all.push_back(entry.label);
    return LabelSpace::from_labels(std::move(all)).labels();
}

namespace {

constexpr char kMagic[4] = {'M', 'C', 'I', 'X'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kFlagNormalized = 1u << 0;

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw InputError("index file truncated while reading " + what);
    }
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw InputError("index file truncated while reading " + what);
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

double get_f64(std::istream& in, const std::string& what) {
    return std::bit_cast<double>(get_u64(in, what));
}

std::string get_string(std::istream& in, const std::string& what) {
    const std::uint32_t size = get_u32(in, what + " length");
    std::string s(size, '\0');
    if (size > 0 && !in.read(s.data(), size)) {
        throw InputError("index file truncated while reading " + what);
    }
    return s;
}

}  // namespace

void EmbeddedDataset::save(const std::filesystem::path& index_path,
                           const std::filesystem::path& manifest_path) const {
    std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open index file '" + index_path.string() + "' for writing");

    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, kFlagNormalized);
    put_u32(out, static_cast<std::uint32_t>(dimension_));
    put_u64(out, entries_.size());
    put_string(out, embedder_id_);
    for (const auto& entry : entries_) {
        put_string(out, entry.label.canonical());
        put_string(out, entry.source_instance_id);
    }
    for (const auto& entry : entries_) {
        for (double v : entry.embedding.values()) put_f64(out, v);
    }
    if (!out) throw InputError("failed writing index file '" + index_path.string() + "'");
    out.close();

    json manifest = {{"dimension", dimension_},
                     {"entry_count", entries_.size()},
                     {"embedder", embedder_id_},
                     {"normalized", true},
                     {"format_version", kFormatVersion}};
    std::ofstream mout(manifest_path, std::ios::binary | std::ios::trunc);
    if (!mout) {
        throw InputError("cannot open manifest file '" + manifest_path.string() + "' for writing");
    }
    mout << manifest.dump(2) << '\n';
}

EmbeddedDataset EmbeddedDataset::load(const std::filesystem::path& index_path) {
    std::ifstream in(index_path, std::ios::binary);
    if (!in) throw InputError("cannot open index file '" + index_path.string() + "'");

    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
        throw InputError("'" + index_path.string() + "' is not an index file (bad magic)");
    }
    const std::uint32_t version = get_u32(in, "format version");
    if (version != kFormatVersion) {
        throw InputError("index file '" + index_path.string() + "' has format version " +
                         std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
    }
    const std::uint32_t flags = get_u32(in, "flags");
    if ((flags & kFlagNormalized) == 0) {
        throw InputError("index file '" + index_path.string() +
                         "' stores unnormalized vectors, which this engine does not produce");
    }
    const std::uint32_t dimension = get_u32(in, "dimension");
    const std::uint64_t count = get_u64(in, "entry count");
    if (dimension == 0 || count == 0) {
        throw InputError("index file '" + index_path.string() + "' is empty");
    }
    std::string embedder_id = get_string(in, "embedder id");

    std::vector<CompositeLabel> labels;
    std::vector<std::string> ids;
    labels.reserve(count);
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string canonical = get_string(in, "label");
        try {
            labels.push_back(CompositeLabel::parse(canonical));
        } catch (const InputError& e) {
            throw InputError("index file '" + index_path.string() + "': " + e.what());
        }
        ids.push_back(get_string(in, "instance id"));
    }

    std::vector<IndexEntry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<double> values(dimension);
        for (std::uint32_t d = 0; d < dimension; ++d) values[d] = get_f64(in, "vector data");
        entries.push_back(
            {EmbeddingVector(std::move(values)), std::move(labels[i]), std::move(ids[i])});
    }

    return from_entries(std::move(entries), std::move(embedder_id));
}

LabelScoreTable score_labels(const EmbeddingVector& query, const EmbeddedDataset& index,
                             const ScoreOptions& options) {
    if (query.dimension() != index.dimension()) {
        throw InputError("query dimension " + std::to_string(query.dimension()) +
                         " does not match index dimension " + std::to_string(index.dimension()));
    }
    if (!query.is_unit()) throw InputError("query embedding must be L2-normalized");

    LabelScoreTable table;
    for (const auto& entry : index.entries()) {
        if (!options.exclude_instance_id.empty() &&
            entry.source_instance_id == options.exclude_instance_id) {
            continue;
        }
        const double similarity = dot(query, entry.embedding);
        auto [it, inserted] = table.emplace(entry.label, similarity);
        if (!inserted && similarity > it->second) it->second = similarity;
    }
    return table;
}

ScoredRanking top_k_labels(const LabelScoreTable& table, std::size_t k) {
    if (k == 0) throw InputError("k must be at least 1");
    std::vector<ScoredItem> items;
    items.reserve(table.size());
    for (const auto& [label, score] : table) items.push_back({label, score});
    sort_by_score(items);
    if (items.size() > k) {
        items.erase(items.begin() + static_cast<std::ptrdiff_t>(k), items.end());
    }
    return ScoredRanking(std::move(items));
}

}  // namespace miscon
