#include "miscon/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "miscon/errors.hpp"

namespace miscon {

using json = nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& path) {
    return path.is_absolute() ? path : base / path;
}

BackendDescriptor parse_backend(const json& obj, const std::filesystem::path& base,
                                const std::string& role) {
    BackendDescriptor descriptor;
    const std::string kind = obj.value("kind", "fixture");
    if (kind == "fixture") {
        descriptor.kind = BackendKind::fixture;
    } else if (kind == "http") {
        descriptor.kind = BackendKind::http;
    } else {
        throw InputError("backend '" + role + "' has unknown kind '" + kind +
                         "' (expected fixture or http)");
    }
    if (!obj.contains("endpoint")) {
        throw InputError("backend '" + role + "' has no endpoint");
    }
    descriptor.endpoint = obj.at("endpoint").get<std::string>();
    if (descriptor.kind == BackendKind::fixture) {
        descriptor.endpoint = resolve(base, descriptor.endpoint).string();
    }
    descriptor.model_id = obj.value("model_id", std::string{});
    descriptor.timeout = std::chrono::milliseconds(obj.value("timeout_ms", 30000));
    descriptor.max_in_flight = obj.value("max_in_flight", std::size_t{4});
    descriptor.retry_budget = obj.value("retry_budget", 2);
    if (descriptor.max_in_flight < 1) {
        throw InputError("backend '" + role + "' max_in_flight must be at least 1");
    }
    if (descriptor.retry_budget < 0) {
        throw InputError("backend '" + role + "' retry_budget must be nonnegative");
    }
    return descriptor;
}

void validate(const RunConfig& config) {
    if (config.workers < 1) throw InputError("workers must be at least 1");
    if (config.k < 1) throw InputError("k must be at least 1");
    if (!(config.tau > 0.0) || !std::isfinite(config.tau)) {
        throw InputError("tau must be a positive number");
    }
    config.mask_weights.validate();
    if (config.m_candidates < 1) throw InputError("m_candidates must be at least 1");
    if (!(config.teacher_temperature >= 0.0) || !std::isfinite(config.teacher_temperature)) {
        throw InputError("teacher_temperature must be a nonnegative number");
    }
    config.fusion.validate();
    if (config.map_cutoffs.empty()) throw InputError("map_cutoffs must not be empty");
    for (std::size_t m : config.map_cutoffs) {
        if (m < 1) throw InputError("map_cutoffs entries must be at least 1");
    }
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config file '" + path.string() + "'");
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("config file '" + path.string() + "': " + e.what());
    }

    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    RunConfig config;
    try {
        config.seed = obj.value("seed", std::uint64_t{0});
        config.workers = obj.value("workers", std::size_t{1});

        if (obj.contains("paths")) {
            const json& paths = obj.at("paths");
            if (paths.contains("dataset_csv")) {
                config.dataset_csv = resolve(base, paths.at("dataset_csv").get<std::string>());
            }
            if (paths.contains("instances")) {
                config.instances = resolve(base, paths.at("instances").get<std::string>());
            }
            config.templates_dir =
                resolve(base, paths.value("templates_dir", std::string{"templates"}));
            config.output_dir = resolve(base, paths.value("output_dir", std::string{"out"}));
        } else {
            config.templates_dir = resolve(base, "templates");
            config.output_dir = resolve(base, "out");
        }

        if (obj.contains("ingest")) {
            const json& ingest = obj.at("ingest");
            const std::string delimiter = ingest.value("delimiter", std::string{","});
            if (delimiter.size() != 1) {
                throw InputError("ingest delimiter must be a single character");
            }
            config.ingest.delimiter = delimiter.front();
            if (ingest.contains("columns")) {
                const json& columns = ingest.at("columns");
                ColumnMap& map = config.ingest.columns;
                map.instance_id = columns.value("instance_id", map.instance_id);
                map.question = columns.value("question", map.question);
                map.answer = columns.value("answer", map.answer);
                map.explanation = columns.value("explanation", map.explanation);
                map.category = columns.value("category", map.category);
                map.misconception = columns.value("misconception", map.misconception);
            }
            if (ingest.contains("max_rejected_rows") &&
                !ingest.at("max_rejected_rows").is_null()) {
                config.max_rejected_rows = ingest.at("max_rejected_rows").get<std::size_t>();
            }
        }

        if (obj.contains("backends")) {
            const json& backends = obj.at("backends");
            const auto parse_role = [&](const char* role) -> std::optional<BackendDescriptor> {
                if (!backends.contains(role)) return std::nullopt;
                return parse_backend(backends.at(role), base, role);
            };
            config.embedder = parse_role("embedder");
            config.reasoner = parse_role("reasoner");
            config.teacher = parse_role("teacher");
            config.judge = parse_role("judge");
            config.reranker = parse_role("reranker");
        }

        if (obj.contains("hyperparameters")) {
            const json& hp = obj.at("hyperparameters");
            config.k = hp.value("k", config.k);
            config.tau = hp.value("tau", config.tau);
            if (hp.contains("mask_weights")) {
                const json& weights = hp.at("mask_weights");
                config.mask_weights.same_label =
                    weights.value("same_label", config.mask_weights.same_label);
                config.mask_weights.same_category =
                    weights.value("same_category", config.mask_weights.same_category);
                config.mask_weights.same_reasoning =
                    weights.value("same_reasoning", config.mask_weights.same_reasoning);
            }
            config.m_candidates = hp.value("m_candidates", config.m_candidates);
            config.m_negatives = hp.value("m_negatives", config.m_negatives);
            config.teacher_temperature =
                hp.value("teacher_temperature", config.teacher_temperature);
            config.fusion.alpha = hp.value("alpha", config.fusion.alpha);
            config.fusion.beta = hp.value("beta", config.fusion.beta);
            if (hp.contains("map_cutoffs")) {
                config.map_cutoffs = hp.at("map_cutoffs").get<std::vector<std::size_t>>();
            }
            config.exclude_self = hp.value("exclude_self", config.exclude_self);
        }
    } catch (const json::exception& e) {
        throw InputError("config file '" + path.string() + "': " + e.what());
    }

    validate(config);
    return config;
}

const BackendDescriptor& RunConfig::require_backend(
    const std::optional<BackendDescriptor>& descriptor, const char* role) const {
    if (!descriptor.has_value()) {
        throw InputError("config has no 'backends." + std::string(role) + "' section");
    }
    return *descriptor;
}

}  // namespace miscon
