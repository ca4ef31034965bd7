#include "miscon/dataset.hpp"

#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "miscon/csv.hpp"
#include "miscon/errors.hpp"

namespace miscon {

using nlohmann::json;

std::string trim_copy(std::string_view s) {
    const auto is_space = [](unsigned char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
    };
    std::size_t begin = 0, end = s.size();
    while (begin < end && is_space(s[begin])) ++begin;
    while (end > begin && is_space(s[end - 1])) --end;
    return std::string(s.substr(begin, end - begin));
}

namespace {

std::size_t require_column(const std::unordered_map<std::string, std::size_t>& header,
                           const std::string& name) {
    const auto it = header.find(name);
    if (it == header.end()) throw InputError("dataset is missing column '" + name + "'");
    return it->second;
}

}  // namespace

IngestResult ingest_dataset(std::istream& in, const IngestOptions& options) {
    CsvReader reader(in, options.delimiter);

    const auto header_row = reader.next_row();
    if (!header_row) throw InputError("dataset is empty: no header row");

    std::unordered_map<std::string, std::size_t> header;
    for (std::size_t i = 0; i < header_row->size(); ++i) {
        header.emplace(trim_copy((*header_row)[i]), i);
    }

    const auto& cols = options.columns;
    const std::size_t col_id = require_column(header, cols.instance_id);
    const std::size_t col_q = require_column(header, cols.question);
    const std::size_t col_a = require_column(header, cols.answer);
    const std::size_t col_e = require_column(header, cols.explanation);
    const std::size_t col_cat = require_column(header, cols.category);
    const std::size_t col_misc = require_column(header, cols.misconception);
    const std::size_t width_needed =
        std::max({col_id, col_q, col_a, col_e, col_cat, col_misc}) + 1;

    IngestResult result;
    std::unordered_set<std::string> seen_ids;

    for (std::size_t row_index = 0;; ++row_index) {
        const auto row = reader.next_row();
        if (!row) break;
        ++result.row_count;

        const auto reject = [&](std::string reason) {
            result.rejections.push_back({row_index, std::move(reason)});
        };

        if (row->size() < width_needed) {
            reject("row has " + std::to_string(row->size()) + " fields, expected at least " +
                   std::to_string(width_needed));
            continue;
        }

        QueryTriplet triplet;
        triplet.instance_id = trim_copy((*row)[col_id]);
        triplet.question_text = trim_copy((*row)[col_q]);
        triplet.chosen_answer = trim_copy((*row)[col_a]);
        triplet.explanation = trim_copy((*row)[col_e]);

        if (triplet.instance_id.empty()) {
            reject("empty " + cols.instance_id);
            continue;
        }
        if (triplet.question_text.empty()) {
            reject("empty " + cols.question);
            continue;
        }
        if (triplet.chosen_answer.empty()) {
            reject("empty " + cols.answer);
            continue;
        }
        if (!seen_ids.insert(triplet.instance_id).second) {
            reject("duplicate instance_id '" + triplet.instance_id + "'");
            continue;
        }

        const std::string category = trim_copy((*row)[col_cat]);
        const std::string misconception = trim_copy((*row)[col_misc]);
        try {
            CompositeLabel label = CompositeLabel::parse(
                category + ":" + (misconception.empty() ? std::string(kNoMisconception)
                                                        : misconception));
            result.records.push_back({std::move(triplet), std::move(label)});
        } catch (const InputError& e) {
            seen_ids.erase(triplet.instance_id);
            reject(e.what());
        }
    }

    return result;
}

IngestResult ingest_dataset_file(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset file '" + path.string() + "'");
    return ingest_dataset(in, options);
}

void write_rejection_report(std::ostream& out, const std::vector<RejectedRow>& rejections) {
    for (const auto& r : rejections) {
        json line{{"row_index", r.row_index}, {"reason", r.reason}};
        out << line.dump() << '\n';
    }
}

void write_records_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
    for (const auto& rec : records) {
        json line{{"instance_id", rec.triplet.instance_id},
                  {"question", rec.triplet.question_text},
                  {"answer", rec.triplet.chosen_answer},
                  {"explanation", rec.triplet.explanation},
                  {"label", rec.label.canonical()}};
        out << line.dump() << '\n';
    }
}

std::vector<DatasetRecord> read_records_jsonl(std::istream& in) {
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError("records line " + std::to_string(line_no) + ": " + e.what());
        }
        QueryTriplet triplet;
        try {
            triplet.instance_id = obj.at("instance_id").get<std::string>();
            triplet.question_text = obj.at("question").get<std::string>();
            triplet.chosen_answer = obj.at("answer").get<std::string>();
            triplet.explanation = obj.value("explanation", std::string{});
            records.push_back(
                {std::move(triplet), CompositeLabel::parse(obj.at("label").get<std::string>())});
        } catch (const json::exception& e) {
            throw InputError("records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::vector<DatasetRecord> read_records_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open records file '" + path.string() + "'");
    return read_records_jsonl(in);
}

std::vector<QueryTriplet> read_triplets_jsonl(std::istream& in) {
    std::vector<QueryTriplet> triplets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError("instances line " + std::to_string(line_no) + ": " + e.what());
        }
        QueryTriplet triplet;
        try {
            triplet.instance_id = obj.at("instance_id").get<std::string>();
            triplet.question_text = obj.at("question").get<std::string>();
            triplet.chosen_answer = obj.at("answer").get<std::string>();
            triplet.explanation = obj.value("explanation", std::string{});
        } catch (const json::exception& e) {
            throw InputError("instances line " + std::to_string(line_no) + ": " + e.what());
        }
        triplets.push_back(std::move(triplet));
    }
    return triplets;
}

std::vector<QueryTriplet> read_triplets_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open instances file '" + path.string() + "'");
    return read_triplets_jsonl(in);
}

}  // namespace miscon
