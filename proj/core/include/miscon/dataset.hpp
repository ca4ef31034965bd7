#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "miscon/label.hpp"

namespace miscon {

/// Maps the engine's field names onto the columns of a delimited dataset file.
/// Defaults mirror the public student-misconception dataset layout; every
/// name is overridable.
struct ColumnMap {
    std::string instance_id = "row_id";
    std::string question = "QuestionText";
    std::string answer = "MC_Answer";
    std::string explanation = "StudentExplanation";
    /// Encodes correctness and reasoning type jointly as
    /// `<correctness>_<reasoning_type>`, e.g. "False_Misconception".
    std::string category = "Category";
    std::string misconception = "Misconception";
};

struct IngestOptions {
    ColumnMap columns;
    char delimiter = ',';
};

/// One rejected input row. row_index is the 0-based position among data rows
/// (the header does not count).
struct RejectedRow {
    std::size_t row_index;
    std::string reason;
};

struct IngestResult {
    std::vector<DatasetRecord> records;
    std::vector<RejectedRow> rejections;
    std::size_t row_count = 0;  // records.size() + rejections.size()
};

/// Parses a delimited file with a header row into dataset records.
/// Bad rows never abort the run; they land in `rejections` with a reason.
/// Throws InputError only for file-level problems (unreadable input, missing
/// mapped column).
IngestResult ingest_dataset(std::istream& in, const IngestOptions& options = {});
IngestResult ingest_dataset_file(const std::filesystem::path& path,
                                 const IngestOptions& options = {});

/// Rejection report: one JSON object per line with fields row_index, reason.
void write_rejection_report(std::ostream& out, const std::vector<RejectedRow>& rejections);

/// Records artifact: one JSON object per line with fields instance_id,
/// question, answer, explanation, label (canonical form).
void write_records_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_records_jsonl(std::istream& in);
std::vector<DatasetRecord> read_records_file(const std::filesystem::path& path);

/// Reads instances for prediction. Lines use the records layout; the label
/// field is optional and ignored when present.
std::vector<QueryTriplet> read_triplets_jsonl(std::istream& in);
std::vector<QueryTriplet> read_triplets_file(const std::filesystem::path& path);

std::string trim_copy(std::string_view s);

}  // namespace miscon
