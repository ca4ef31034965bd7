#include "miscon/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <utility>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"

namespace miscon {

using json = nlohmann::json;

void FusionConfig::validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0 ||
        alpha + beta <= 0.0) {
        throw InputError("fusion weights must be nonnegative and not both zero");
    }
}

std::vector<double> softmax_normalize(const std::vector<double>& scores) {
    if (scores.empty()) throw InputError("softmax needs at least one score");
    double top = -std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (!std::isfinite(s)) throw InputError("softmax input is not finite");
        top = std::max(top, s);
    }
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - top);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

ScoredRanking fuse(const ScoredRanking& rerank, const ScoredRanking& retrieve,
                   const FusionConfig& config) {
    config.validate();
    if (rerank.empty()) throw InputError("fuse needs a non-empty rerank ranking");

    // Keyed by canonical label, which also fixes the softmax fold order.
    std::map<CompositeLabel, std::pair<double, double>> scores;
    for (const auto& item : rerank.items()) {
        scores.emplace(item.label, std::make_pair(item.score, 0.0));
    }
    if (retrieve.size() != rerank.size()) {
        throw InputError("fuse got " + std::to_string(rerank.size()) + " rerank labels but " +
                         std::to_string(retrieve.size()) + " retrieval labels");
    }
    for (const auto& item : retrieve.items()) {
        const auto it = scores.find(item.label);
        if (it == scores.end()) {
            throw InputError("label '" + item.label.canonical() +
                             "' is in the retrieval ranking but not the rerank ranking");
        }
        it->second.second = item.score;
    }

    std::vector<double> rerank_raw;
    std::vector<double> retrieve_raw;
    rerank_raw.reserve(scores.size());
    retrieve_raw.reserve(scores.size());
    for (const auto& [label, pair] : scores) {
        rerank_raw.push_back(pair.first);
        retrieve_raw.push_back(pair.second);
    }
    const std::vector<double> rerank_p = softmax_normalize(rerank_raw);
    const std::vector<double> retrieve_p = softmax_normalize(retrieve_raw);

    std::vector<ScoredItem> fused;
    fused.reserve(scores.size());
    std::size_t i = 0;
    for (const auto& [label, pair] : scores) {
        fused.push_back({label, config.alpha * rerank_p[i] + config.beta * retrieve_p[i]});
        ++i;
    }
    return ScoredRanking::by_score(std::move(fused));
}

double map_at_m(const ScoredRanking& ranking, const CompositeLabel& truth, std::size_t m) {
    if (m < 1) throw InputError("MAP cutoff m must be at least 1");
    const std::size_t rank = ranking.rank_of(truth);
    if (rank == 0 || rank > m) return 0.0;
    return 1.0 / static_cast<double>(rank);
}

EvalReport evaluate(const std::vector<StagePredictions>& predictions,
                    const std::vector<TruthRow>& truths,
                    const std::vector<std::size_t>& m_values) {
    if (m_values.empty()) throw InputError("evaluate needs at least one MAP cutoff");
    for (std::size_t m : m_values) {
        if (m < 1) throw InputError("MAP cutoff m must be at least 1");
    }

    std::map<std::string, const StagePredictions*> by_id;
    for (const auto& prediction : predictions) {
        if (!by_id.emplace(prediction.instance_id, &prediction).second) {
            throw InputError("duplicate prediction for instance '" + prediction.instance_id + "'");
        }
    }
    std::map<std::string, const TruthRow*> truth_by_id;
    for (const auto& truth : truths) {
        if (!truth_by_id.emplace(truth.instance_id, &truth).second) {
            throw InputError("duplicate truth for instance '" + truth.instance_id + "'");
        }
    }
    for (const auto& [id, unused] : by_id) {
        if (!truth_by_id.contains(id)) {
            throw InputError("prediction instance '" + id + "' has no matching truth");
        }
    }
    for (const auto& [id, unused] : truth_by_id) {
        if (!by_id.contains(id)) {
            throw InputError("truth instance '" + id + "' has no matching prediction");
        }
    }

    EvalReport report;
    report.m_values = m_values;
    report.instance_count = by_id.size();

    struct Stage {
        const char* name;
        const ScoredRanking StagePredictions::* ranking;
    };
    const Stage stages[] = {{"retrieval", &StagePredictions::retrieval},
                            {"reranking", &StagePredictions::reranking},
                            {"fused", &StagePredictions::fused}};

    for (const auto& stage : stages) {
        EvalReport::Row row;
        row.stage = stage.name;
        for (std::size_t m : m_values) {
            double total = 0.0;
            for (const auto& [id, prediction] : by_id) {
                total += map_at_m(prediction->*stage.ranking, truth_by_id.at(id)->truth, m);
            }
            row.map_at.push_back(by_id.empty() ? 0.0
                                               : total / static_cast<double>(by_id.size()));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string format_report_table(const EvalReport& report) {
    std::string out;
    char buffer[64];

    std::snprintf(buffer, sizeof(buffer), "%-12s", "stage");
    out += buffer;
    for (std::size_t m : report.m_values) {
        std::snprintf(buffer, sizeof(buffer), "  MAP@%-6zu", m);
        out += buffer;
    }
    out += '\n';
    for (const auto& row : report.rows) {
        std::snprintf(buffer, sizeof(buffer), "%-12s", row.stage.c_str());
        out += buffer;
        for (double value : row.map_at) {
            std::snprintf(buffer, sizeof(buffer), "  %-10.4f", value);
            out += buffer;
        }
        out += '\n';
    }
    std::snprintf(buffer, sizeof(buffer), "instances: %zu\n", report.instance_count);
    out += buffer;
    return out;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json map_at;
        for (std::size_t i = 0; i < report.m_values.size(); ++i) {
            map_at[std::to_string(report.m_values[i])] = row.map_at[i];
        }
        rows.push_back({{"stage", row.stage}, {"map_at", std::move(map_at)}});
    }
    const json obj = {{"instances", report.instance_count},
                      {"m_values", report.m_values},
                      {"rows", std::move(rows)}};
    out << obj.dump(2) << '\n';
}

void write_predictions_jsonl(std::ostream& out, const std::vector<PredictionRow>& rows) {
    for (const auto& row : rows) {
        json ranked = json::array();
        json scores = json::array();
        for (const auto& item : row.ranking.items()) {
            ranked.push_back(item.label.canonical());
            scores.push_back(item.score);
        }
        const json obj = {{"instance_id", row.instance_id},
                          {"ranked", std::move(ranked)},
                          {"scores", std::move(scores)}};
        out << obj.dump() << '\n';
    }
}

std::vector<PredictionRow> read_predictions_jsonl(std::istream& in) {
    std::vector<PredictionRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t' && c != '\r') blank = false;
        }
        if (blank) continue;
        try {
            const json obj = json::parse(line);
            PredictionRow row;
            row.instance_id = obj.at("instance_id").get<std::string>();
            const auto& ranked = obj.at("ranked");
            const auto& scores = obj.at("scores");
            if (ranked.size() != scores.size()) {
                throw InputError("predictions line " + std::to_string(line_no) +
                                 ": ranked and scores lengths differ");
            }
            std::vector<ScoredItem> items;
            items.reserve(ranked.size());
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                items.push_back({CompositeLabel::parse(ranked[i].get<std::string>()),
                                 scores[i].get<double>()});
            }
            row.ranking = ScoredRanking(std::move(items));
            rows.push_back(std::move(row));
        } catch (const json::exception& e) {
            throw InputError("predictions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<PredictionRow> read_predictions_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open predictions file '" + path.string() + "'");
    return read_predictions_jsonl(in);
}

}  // namespace miscon
