#pragma once

// Shared helpers for the unit and acceptance suites: scratch directories,
// independently coded oracles, and the scripted end-to-end fixture corpus.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "miscon/backends.hpp"
#include "miscon/contrastive.hpp"
#include "miscon/dataset.hpp"
#include "miscon/embedding.hpp"
#include "miscon/label.hpp"
#include "miscon/prompts.hpp"
#include "miscon/reasoning.hpp"
#include "miscon/reranking.hpp"
#include "miscon/retrieval.hpp"
#include "miscon/rng.hpp"

namespace miscon::test {

namespace fs = std::filesystem;

inline fs::path cli_path() { return MISCON_CLI_PATH; }
inline fs::path data_dir() { return MISCON_TEST_DATA_DIR; }
inline fs::path golden_dir() { return MISCON_GOLDEN_DIR; }
inline fs::path templates_dir() { return MISCON_TEMPLATES_DIR; }

/// Self-deleting scratch directory.
class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "miscon_test_XXXXXX").string();
        if (::mkdtemp(pattern.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline std::string shell_quote(const std::string& s) {
    std::string quoted = "'";
    for (char c : s) {
        if (c == '\'') {
            quoted += "'\\''";
        } else {
            quoted += c;
        }
    }
    quoted += "'";
    return quoted;
}

/// Runs the installed CLI binary; returns its exit code. stdout and stderr
/// land in `log_path` for inspection.
inline int run_cli(const std::vector<std::string>& args, const fs::path& log_path) {
    std::string command = shell_quote(cli_path().string());
    for (const auto& arg : args) {
        command += ' ';
        command += shell_quote(arg);
    }
    command += " > " + shell_quote(log_path.string()) + " 2>&1";
    const int status = std::system(command.c_str());
    if (status == -1) throw std::runtime_error("std::system failed");
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

inline CompositeLabel label_of(std::string_view canonical) {
    return CompositeLabel::parse(canonical);
}

/// Deterministic pseudo-random unit vector keyed by a tag string.
inline EmbeddingVector unit_vector_for(const std::string& tag, std::size_t dim) {
    SplitMix64 rng(fnv1a64_bytes(tag));
    std::vector<double> values(dim);
    for (auto& value : values) value = rng.next_gaussian();
    EmbeddingVector vector(std::move(values));
    vector.normalize();
    return vector;
}

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately avoid the library's numeric tricks
// (max-subtraction, incremental folds) so agreement is meaningful.
// ---------------------------------------------------------------------------

/// Direct-formula masked supervised contrastive loss, naive exponentials.
inline double supcon_oracle(const std::vector<std::vector<double>>& z,
                            const std::vector<std::vector<double>>& mask, double tau) {
    const std::size_t n = z.size();
    const auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
        return sum;
    };
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double support = 0.0;
        for (std::size_t j = 0; j < n; ++j) support += std::abs(mask[i][j]);
        if (support == 0.0) continue;
        double denom = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) denom += std::exp(dot(z[i], z[a]) / tau);
        }
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (mask[i][j] == 0.0) continue;
            row += mask[i][j] * std::log(std::exp(dot(z[i], z[j]) / tau) / denom);
        }
        loss += -row / support;
    }
    return loss;
}

/// Central finite differences of mask_supcon_loss, h = 1e-5.
inline std::vector<std::vector<double>> fd_gradient(const ContrastiveBatch& batch,
                                                    const SoftMask& mask, double h = 1e-5) {
    std::vector<std::vector<double>> grad(batch.embeddings.size());
    for (std::size_t k = 0; k < batch.embeddings.size(); ++k) {
        grad[k].resize(batch.embeddings[k].dimension());
        for (std::size_t d = 0; d < batch.embeddings[k].dimension(); ++d) {
            ContrastiveBatch plus = batch;
            ContrastiveBatch minus = batch;
            auto bump = [&](ContrastiveBatch& b, double delta) {
                std::vector<double> values(b.embeddings[k].values());
                values[d] += delta;
                b.embeddings[k] = EmbeddingVector(std::move(values));
            };
            bump(plus, h);
            bump(minus, -h);
            grad[k][d] =
                (mask_supcon_loss(plus, mask) - mask_supcon_loss(minus, mask)) / (2.0 * h);
        }
    }
    return grad;
}

/// Brute-force per-label max similarity, coded without the library's fold.
inline std::map<std::string, double> brute_force_label_scores(
    const EmbeddingVector& query, const std::vector<IndexEntry>& entries,
    const std::string& exclude_instance_id = {}) {
    std::map<std::string, double> best;
    for (const auto& entry : entries) {
        if (!exclude_instance_id.empty() && entry.source_instance_id == exclude_instance_id) {
            continue;
        }
        double similarity = 0.0;
        for (std::size_t d = 0; d < query.dimension(); ++d) {
            similarity += query.values()[d] * entry.embedding.values()[d];
        }
        auto it = best.find(entry.label.canonical());
        if (it == best.end()) {
            best.emplace(entry.label.canonical(), similarity);
        } else if (similarity > it->second) {
            it->second = similarity;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Scripted end-to-end corpus. Everything a full CLI run needs: the dataset
// file, replay fixtures for every backend role, and a config pointing at
// them. All scripted values derive from instance ids and labels through
// integer hashes, so the corpus is reproducible from this file alone.
// ---------------------------------------------------------------------------

inline std::string e2e_trace_text(const std::string& instance_id) {
    return "THOUGHT ANALYSIS for " + instance_id +
           ": the explanation is examined step by step against the problem data.";
}

inline EmbeddingVector e2e_embedding(const std::string& instance_id) {
    return unit_vector_for("embed|" + instance_id, 8);
}

/// Scripted verdict log-probabilities for one (instance, label) pair. Exact
/// thousandths, so an external audit can reproduce them without float drift.
inline double e2e_yes_logprob(const std::string& instance_id, const std::string& canonical) {
    return -0.05 - static_cast<double>(fnv1a64_bytes(instance_id + "|" + canonical) % 1000) / 1000.0;
}
inline double e2e_no_logprob(const std::string& instance_id, const std::string& canonical) {
    return -0.05 - static_cast<double>(fnv1a64_bytes(canonical + "|" + instance_id) % 1000) / 1000.0;
}

inline std::string e2e_candidate_text(const std::string& instance_id, std::size_t index) {
    return "Candidate analysis " + std::to_string(index) + " for " + instance_id + ".";
}

/// Judge replies: candidate (fnv(id) % candidates) wins with score 9, the
/// rest get 4.
inline std::string e2e_judge_reply(const std::string& instance_id, std::size_t index,
                                   std::size_t candidates) {
    const std::size_t winner = fnv1a64_bytes(instance_id) % candidates;
    return index == winner ? "9" : "4";
}

struct E2eCorpus {
    fs::path dir;
    fs::path config_path;
    fs::path dataset_csv;
    fs::path output_dir;
    std::vector<DatasetRecord> records;
};

inline constexpr std::uint64_t kE2eSeed = 7;
inline constexpr std::size_t kE2eCandidates = 2;

/// Builds the corpus under `dir`. The dataset file is the checked-in CSV;
/// fixture entries are derived from its parsed records.
inline E2eCorpus make_e2e_corpus(const fs::path& dir) {
    E2eCorpus corpus;
    corpus.dir = dir;
    fs::create_directories(dir / "fixtures");

    corpus.dataset_csv = dir / "dataset.csv";
    fs::copy_file(data_dir() / "e2e_corpus.csv", corpus.dataset_csv,
                  fs::copy_options::overwrite_existing);

    const IngestResult ingested = ingest_dataset_file(corpus.dataset_csv);
    corpus.records = ingested.records;
    const LabelSpace space = LabelSpace::from_records(corpus.records);

    const PromptTemplate reasoner_tmpl =
        load_pinned(templates_dir() / "reasoner_v1.txt");
    const PromptTemplate judge_tmpl = load_pinned(templates_dir() / "judge_v1.txt");
    const PromptTemplate verify_tmpl =
        load_pinned(templates_dir() / "rerank_verify_v1.txt");

    {
        FixtureWriter embeddings((dir / "fixtures" / "embeddings.jsonl").string());
        for (const auto& record : corpus.records) {
            embeddings.add_embedding(embedding_input_text(record.triplet),
                                     e2e_embedding(record.triplet.instance_id).values());
        }
    }

    {
        FixtureWriter completions((dir / "fixtures" / "completions.jsonl").string());
        for (const auto& record : corpus.records) {
            const std::string& id = record.triplet.instance_id;

            // Deterministic reasoner call made by predict.
            SamplingParams deterministic;
            deterministic.temperature = 0.0;
            deterministic.seed = 0;
            deterministic.max_tokens = kReasoningMaxTokens;
            completions.add_completion(
                reasoning_request(record.triplet, reasoner_tmpl, deterministic),
                e2e_trace_text(id), {});

            // Teacher samples and judge verdicts made by distill.
            for (std::size_t index = 0; index < kE2eCandidates; ++index) {
                SamplingParams sampling;
                sampling.temperature = 0.8;
                sampling.seed = derive_seed(kE2eSeed, id, index);
                sampling.max_tokens = kReasoningMaxTokens;
                completions.add_completion(
                    reasoning_request(record.triplet, reasoner_tmpl, sampling),
                    e2e_candidate_text(id, index), {});
                completions.add_completion(
                    judge_request(record, e2e_candidate_text(id, index), judge_tmpl),
                    e2e_judge_reply(id, index, kE2eCandidates), {});
            }

            // Verification scores for every label, so any Y_k is covered.
            ReasoningTrace trace;
            trace.text = e2e_trace_text(id);
            trace.instance_id = id;
            for (const auto& candidate : space.labels()) {
                const VerificationPrompt prompt =
                    build_prompt(record.triplet, trace, candidate, verify_tmpl);
                CompletionRequest request;
                request.messages = prompt.messages();
                request.sampling.temperature = 0.0;
                request.sampling.seed = 0;
                request.sampling.max_tokens = 1;
                const double yes = e2e_yes_logprob(id, candidate.canonical());
                const double no = e2e_no_logprob(id, candidate.canonical());
                completions.add_completion(request, yes >= no ? "Yes" : "No",
                                           {{"Yes", yes}, {"No", no}});
            }
        }
    }

    corpus.output_dir = dir / "out";
    corpus.config_path = dir / "config.json";
    std::ostringstream config;
    config << "{\n"
           << "  \"seed\": " << kE2eSeed << ",\n"
           << "  \"workers\": 1,\n"
           << "  \"paths\": {\n"
           << "    \"dataset_csv\": \"dataset.csv\",\n"
           << "    \"templates_dir\": \"" << templates_dir().string() << "\",\n"
           << "    \"output_dir\": \"out\"\n"
           << "  },\n"
           << "  \"backends\": {\n"
           << "    \"embedder\": {\"kind\": \"fixture\", \"endpoint\": \"fixtures/embeddings.jsonl\"},\n"
           << "    \"reasoner\": {\"kind\": \"fixture\", \"endpoint\": \"fixtures/completions.jsonl\"},\n"
           << "    \"teacher\": {\"kind\": \"fixture\", \"endpoint\": \"fixtures/completions.jsonl\"},\n"
           << "    \"judge\": {\"kind\": \"fixture\", \"endpoint\": \"fixtures/completions.jsonl\"},\n"
           << "    \"reranker\": {\"kind\": \"fixture\", \"endpoint\": \"fixtures/completions.jsonl\"}\n"
           << "  },\n"
           << "  \"hyperparameters\": {\n"
           << "    \"k\": 3,\n"
           << "    \"m_candidates\": " << kE2eCandidates << ",\n"
           << "    \"m_negatives\": 2,\n"
           << "    \"alpha\": 0.7,\n"
           << "    \"beta\": 0.3,\n"
           << "    \"map_cutoffs\": [1, 3, 5],\n"
           << "    \"exclude_self\": true\n"
           << "  }\n"
           << "}\n";
    write_file(corpus.config_path, config.str());
    return corpus;
}

}  // namespace miscon::test
