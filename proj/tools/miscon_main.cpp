// miscon: command-line surface for the misconception ranking pipeline.
// Subcommands compose through file artifacts under the configured output
// directory; no state is carried between invocations.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "miscon/backends.hpp"
#include "miscon/config.hpp"
#include "miscon/dataset.hpp"
#include "miscon/errors.hpp"
#include "miscon/fusion.hpp"
#include "miscon/pipeline.hpp"
#include "miscon/prompts.hpp"
#include "miscon/reasoning.hpp"
#include "miscon/reranking.hpp"
#include "miscon/retrieval.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBackendError = 2;

std::ofstream open_artifact(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw miscon::InputError("cannot write artifact file '" + path.string() + "'");
    }
    return out;
}

void require_written(const std::ofstream& out, const fs::path& path) {
    if (!out) {
        throw miscon::InputError("write to artifact file '" + path.string() + "' failed");
    }
}

/// Instances for predict: the configured instances file when present,
/// otherwise the ingested records artifact.
std::vector<miscon::QueryTriplet> load_instances(const miscon::RunConfig& config) {
    if (!config.instances.empty()) {
        return miscon::read_triplets_file(config.instances);
    }
    std::vector<miscon::QueryTriplet> instances;
    for (auto& record : miscon::read_records_file(config.records_path())) {
        instances.push_back(std::move(record.triplet));
    }
    return instances;
}

int cmd_ingest(const miscon::RunConfig& config) {
    const miscon::IngestResult result =
        miscon::ingest_dataset_file(config.dataset_csv, config.ingest);

    fs::create_directories(config.output_dir);
    {
        auto out = open_artifact(config.records_path());
        miscon::write_records_jsonl(out, result.records);
        require_written(out, config.records_path());
    }
    {
        auto out = open_artifact(config.rejections_path());
        miscon::write_rejection_report(out, result.rejections);
        require_written(out, config.rejections_path());
    }

    std::cout << "ingested " << result.records.size() << " records, rejected "
              << result.rejections.size() << " rows\n"
              << "records: " << config.records_path().string() << "\n"
              << "rejections: " << config.rejections_path().string() << "\n";

    if (config.max_rejected_rows.has_value() &&
        result.rejections.size() > *config.max_rejected_rows) {
        throw miscon::InputError(
            "rejected " + std::to_string(result.rejections.size()) +
            " rows, more than the configured limit of " +
            std::to_string(*config.max_rejected_rows) + "; see report at '" +
            config.rejections_path().string() + "'");
    }
    return kExitOk;
}

int cmd_index(const miscon::RunConfig& config) {
    const auto records = miscon::read_records_file(config.records_path());
    const auto embedder =
        miscon::make_embedding_backend(config.require_backend(config.embedder, "embedder"));

    const auto index = miscon::EmbeddedDataset::build(records, *embedder, config.workers);

    fs::create_directories(config.output_dir);
    index.save(config.index_path(), config.index_manifest_path());

    std::cout << "indexed " << index.size() << " vectors (dimension " << index.dimension()
              << ", embedder '" << index.embedder_id() << "')\n"
              << "index: " << config.index_path().string() << "\n"
              << "manifest: " << config.index_manifest_path().string() << "\n";
    return kExitOk;
}

int cmd_distill(const miscon::RunConfig& config) {
    const auto records = miscon::read_records_file(config.records_path());
    const auto teacher =
        miscon::make_completion_backend(config.require_backend(config.teacher, "teacher"));
    const auto judge =
        miscon::make_completion_backend(config.require_backend(config.judge, "judge"));
    const auto reasoner_prompt = miscon::load_pinned(config.reasoner_template_path());
    const auto judge_prompt = miscon::load_pinned(config.judge_template_path());

    miscon::DistillationConfig distill;
    distill.candidates = config.m_candidates;
    distill.seed = config.seed;
    distill.teacher_temperature = config.teacher_temperature;
    distill.workers = config.workers;

    const miscon::DistillationResult result = miscon::build_distilled_dataset(
        records, reasoner_prompt, judge_prompt, *teacher, *judge, distill);

    fs::create_directories(config.output_dir);
    {
        auto out = open_artifact(config.distilled_path());
        miscon::write_distilled_jsonl(out, result.records);
        require_written(out, config.distilled_path());
    }
    {
        auto out = open_artifact(config.distilled_sft_path());
        miscon::write_distilled_sft_jsonl(out, result.records, reasoner_prompt);
        require_written(out, config.distilled_sft_path());
    }
    {
        auto out = open_artifact(config.distill_failures_path());
        miscon::write_distillation_failures(out, result.failures);
        require_written(out, config.distill_failures_path());
    }

    std::cout << "distilled " << result.records.size() << " of " << records.size()
              << " records (" << result.failures.size() << " failures)\n"
              << "distilled: " << config.distilled_path().string() << "\n"
              << "sft: " << config.distilled_sft_path().string() << "\n"
              << "failures: " << config.distill_failures_path().string() << "\n";

    bool backend_fault = false;
    for (const auto& failure : result.failures) backend_fault |= failure.backend_fault;
    if (backend_fault) return kExitBackendError;
    return result.failures.empty() ? kExitOk : kExitInputError;
}

int cmd_augment(const miscon::RunConfig& config) {
    const auto distilled = miscon::read_distilled_file(config.distilled_path());
    const auto records = miscon::read_records_file(config.records_path());
    const auto space = miscon::LabelSpace::from_records(records);
    const auto verify_prompt = miscon::load_pinned(config.verify_template_path());

    const auto examples = miscon::build_verification_dataset(distilled, space, config.m_negatives,
                                                             config.seed, verify_prompt);

    fs::create_directories(config.output_dir);
    {
        auto out = open_artifact(config.verification_path());
        miscon::write_verification_jsonl(out, examples);
        require_written(out, config.verification_path());
    }
    {
        auto out = open_artifact(config.verification_sft_path());
        miscon::write_verification_sft_jsonl(out, examples);
        require_written(out, config.verification_sft_path());
    }

    std::size_t positives = 0;
    for (const auto& example : examples) {
        if (example.origin == miscon::ExampleOrigin::positive) ++positives;
    }
    std::cout << "wrote " << examples.size() << " verification examples (" << positives
              << " positive, " << (examples.size() - positives) << " negative)\n"
              << "examples: " << config.verification_path().string() << "\n"
              << "sft: " << config.verification_sft_path().string() << "\n";
    return kExitOk;
}

int cmd_predict(const miscon::RunConfig& config) {
    const auto index = miscon::EmbeddedDataset::load(config.index_path());
    const auto embedder =
        miscon::make_embedding_backend(config.require_backend(config.embedder, "embedder"));
    const auto reasoner =
        miscon::make_completion_backend(config.require_backend(config.reasoner, "reasoner"));
    const auto reranker =
        miscon::make_completion_backend(config.require_backend(config.reranker, "reranker"));
    auto reasoner_prompt = miscon::load_pinned(config.reasoner_template_path());
    auto verify_prompt = miscon::load_pinned(config.verify_template_path());

    const auto instances = load_instances(config);

    miscon::PipelineConfig pipeline_config;
    pipeline_config.k = config.k;
    pipeline_config.fusion = config.fusion;
    pipeline_config.exclude_self = config.exclude_self;

    const miscon::Pipeline pipeline(index, *embedder, *reasoner, *reranker,
                                    std::move(reasoner_prompt), std::move(verify_prompt),
                                    pipeline_config);
    const auto result = pipeline.predict_batch(instances, config.workers);

    fs::create_directories(config.output_dir);
    const auto write_rankings = [&](const fs::path& path, auto member) {
        std::vector<miscon::PredictionRow> rows;
        rows.reserve(result.predictions.size());
        for (const auto& prediction : result.predictions) {
            rows.push_back({prediction.instance_id, prediction.*member});
        }
        auto out = open_artifact(path);
        miscon::write_predictions_jsonl(out, rows);
        require_written(out, path);
    };
    write_rankings(config.predictions_path(), &miscon::InstancePrediction::fused);
    write_rankings(config.predictions_retrieval_path(), &miscon::InstancePrediction::retrieval);
    write_rankings(config.predictions_reranking_path(), &miscon::InstancePrediction::reranking);
    {
        auto out = open_artifact(config.predict_failures_path());
        miscon::Pipeline::write_failures(out, result.failures);
        require_written(out, config.predict_failures_path());
    }

    std::cout << "predicted " << result.predictions.size() << " of " << instances.size()
              << " instances (" << result.failures.size() << " failures)\n"
              << "predictions: " << config.predictions_path().string() << "\n"
              << "failures: " << config.predict_failures_path().string() << "\n";

    bool backend_fault = false;
    for (const auto& failure : result.failures) backend_fault |= failure.backend_fault;
    if (backend_fault) return kExitBackendError;
    return result.failures.empty() ? kExitOk : kExitInputError;
}

int cmd_evaluate(const miscon::RunConfig& config) {
    const auto fused = miscon::read_predictions_file(config.predictions_path());
    const auto retrieval = miscon::read_predictions_file(config.predictions_retrieval_path());
    const auto reranking = miscon::read_predictions_file(config.predictions_reranking_path());

    const auto index_rows = [](const std::vector<miscon::PredictionRow>& rows,
                               const char* artifact) {
        std::map<std::string, const miscon::PredictionRow*> by_id;
        for (const auto& row : rows) {
            if (!by_id.emplace(row.instance_id, &row).second) {
                throw miscon::InputError(std::string(artifact) +
                                         " predictions repeat instance id '" + row.instance_id +
                                         "'");
            }
        }
        return by_id;
    };
    const auto retrieval_by_id = index_rows(retrieval, "retrieval");
    const auto reranking_by_id = index_rows(reranking, "reranking");

    std::vector<miscon::StagePredictions> predictions;
    predictions.reserve(fused.size());
    for (const auto& row : fused) {
        const auto retrieval_it = retrieval_by_id.find(row.instance_id);
        if (retrieval_it == retrieval_by_id.end()) {
            throw miscon::InputError("retrieval predictions are missing instance id '" +
                                     row.instance_id + "'");
        }
        const auto reranking_it = reranking_by_id.find(row.instance_id);
        if (reranking_it == reranking_by_id.end()) {
            throw miscon::InputError("reranking predictions are missing instance id '" +
                                     row.instance_id + "'");
        }
        predictions.push_back({row.instance_id, retrieval_it->second->ranking,
                               reranking_it->second->ranking, row.ranking});
    }

    std::vector<miscon::TruthRow> truths;
    for (const auto& record : miscon::read_records_file(config.records_path())) {
        truths.push_back({record.triplet.instance_id, record.label});
    }

    const miscon::EvalReport report = miscon::evaluate(predictions, truths, config.map_cutoffs);
    const std::string table = miscon::format_report_table(report);

    fs::create_directories(config.output_dir);
    {
        auto out = open_artifact(config.report_text_path());
        out << table;
        require_written(out, config.report_text_path());
    }
    {
        auto out = open_artifact(config.report_json_path());
        miscon::write_report_json(out, report);
        require_written(out, config.report_json_path());
    }

    std::cout << table << "report: " << config.report_text_path().string() << "\n"
              << "json: " << config.report_json_path().string() << "\n";
    return kExitOk;
}

struct Overrides {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t k = 10;
    double alpha = 0.7;
    double beta = 0.3;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* k_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
};

/// Flags win over the config file; ranges are re-checked after overriding.
miscon::RunConfig load_config(const std::string& config_path, const Overrides& overrides) {
    miscon::RunConfig config = miscon::RunConfig::load(config_path);
    if (overrides.seed_opt->count() > 0) config.seed = overrides.seed;
    if (overrides.workers_opt->count() > 0) config.workers = overrides.workers;
    if (overrides.k_opt->count() > 0) config.k = overrides.k;
    if (overrides.alpha_opt->count() > 0) config.fusion.alpha = overrides.alpha;
    if (overrides.beta_opt->count() > 0) config.fusion.beta = overrides.beta;
    if (config.workers == 0) throw miscon::InputError("workers must be at least 1");
    if (config.k == 0) throw miscon::InputError("k must be at least 1");
    config.fusion.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"misconception ranking pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    app.add_option("--config", config_path, "Run configuration JSON file")->required();
    overrides.seed_opt = app.add_option("--seed", overrides.seed, "Override the config seed");
    overrides.workers_opt =
        app.add_option("--workers", overrides.workers, "Override the worker count");
    overrides.k_opt = app.add_option("--k", overrides.k, "Override the candidate set size");
    overrides.alpha_opt =
        app.add_option("--alpha", overrides.alpha, "Override the rerank fusion weight");
    overrides.beta_opt =
        app.add_option("--beta", overrides.beta, "Override the retrieval fusion weight");

    int (*command)(const miscon::RunConfig&) = nullptr;
    const auto add_command = [&](const char* name, const char* help,
                                 int (*handler)(const miscon::RunConfig&)) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        sub->callback([&command, handler] { command = handler; });
    };
    add_command("ingest", "Parse the dataset file into the records artifact", cmd_ingest);
    add_command("index", "Embed the records artifact into a retrieval index", cmd_index);
    add_command("distill", "Generate and judge reasoning traces for every record", cmd_distill);
    add_command("augment", "Build the verification training set from distilled traces",
                cmd_augment);
    add_command("predict", "Rank labels for input instances through the full pipeline",
                cmd_predict);
    add_command("evaluate", "Score prediction artifacts against ground truth", cmd_evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        const miscon::RunConfig config = load_config(config_path, overrides);
        return command(config);
    } catch (const miscon::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.backend_fault() ? kExitBackendError : kExitInputError;
    } catch (const miscon::BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackendError;
    } catch (const miscon::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}
