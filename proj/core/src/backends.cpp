#include "miscon/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "miscon/errors.hpp"
#include "miscon/rng.hpp"

namespace miscon {

using json = nlohmann::json;

InFlightGate::InFlightGate(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

InFlightGate::Pass::Pass(Pass&& other) noexcept : gate_(other.gate_) { other.gate_ = nullptr; }

InFlightGate::Pass::~Pass() {
    if (gate_ != nullptr) gate_->leave();
}

InFlightGate::Pass InFlightGate::enter() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return active_ < limit_; });
    ++active_;
    peak_ = std::max(peak_, active_);
    return Pass(this);
}

std::size_t InFlightGate::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

void InFlightGate::leave() {
    {
        std::lock_guard lock(mutex_);
        --active_;
    }
    cv_.notify_one();
}

std::string fixture_key_for_text(std::string_view text) {
    return to_hex(fnv1a64_bytes(text));
}

std::string fixture_key_for_request(const CompletionRequest& request) {
    json canon;
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"content", m.content}, {"role", m.role}});
    }
    canon["messages"] = std::move(messages);
    canon["sampling"] = {{"max_tokens", request.sampling.max_tokens},
                         {"seed", request.sampling.seed},
                         {"temperature", request.sampling.temperature}};
    return to_hex(fnv1a64_bytes(canon.dump()));
}

double pool_target_logprob(const std::map<std::string, double>& alternatives,
                           const LogprobTarget& target) {
    std::vector<double> found;
    for (const auto& variant : target.variants) {
        auto it = alternatives.find(variant);
        if (it != alternatives.end()) found.push_back(it->second);
    }
    if (found.empty()) {
        std::string variants;
        for (const auto& v : target.variants) {
            if (!variants.empty()) variants += ", ";
            variants += "'" + v + "'";
        }
        throw BackendError("no scored first-token alternative matches target '" + target.name +
                           "' (accepted variants: " + variants + ")");
    }
    // A single match is returned as-is; pooling through exp/log would only
    // add rounding noise.
    if (found.size() == 1) return found.front();
    const double top = *std::max_element(found.begin(), found.end());
    double mass = 0.0;
    for (double lp : found) mass += std::exp(lp - top);
    return top + std::log(mass);
}

namespace {

json parse_fixture_line(const std::string& path, std::size_t line_no, const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw InputError("fixture file '" + path + "' line " + std::to_string(line_no) + ": " +
                         e.what());
    }
}

std::string resolve_endpoint(const std::string& endpoint) {
    constexpr std::string_view env_prefix = "env:";
    if (endpoint.rfind(env_prefix, 0) != 0) return endpoint;
    const std::string name = endpoint.substr(env_prefix.size());
    const char* value = std::getenv(name.c_str());
    if (value == nullptr || *value == '\0') {
        throw InputError("environment variable '" + name + "' is not set (endpoint '" + endpoint +
                         "')");
    }
    return value;
}

std::string backend_label(const BackendDescriptor& d, const char* fallback) {
    return d.model_id.empty() ? std::string(fallback) : d.model_id;
}

class FixtureEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit FixtureEmbeddingBackend(const BackendDescriptor& descriptor)
        : path_(descriptor.endpoint),
          id_(backend_label(descriptor, "fixture-embedder")),
          gate_(descriptor.max_in_flight) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw InputError("cannot open embedding fixture file '" + path_ + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json obj = parse_fixture_line(path_, line_no, line);
            try {
                entries_[obj.at("key").get<std::string>()] =
                    obj.at("vector").get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw InputError("fixture file '" + path_ + "' line " + std::to_string(line_no) +
                                 ": " + e.what());
            }
        }
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw InputError("embed requires at least one text");
        auto pass = gate_.enter();
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            const std::string key = fixture_key_for_text(text);
            auto it = entries_.find(key);
            if (it == entries_.end()) {
                throw BackendError("embedding fixture '" + path_ + "' has no entry for key '" +
                                   key + "'");
            }
            out.emplace_back(it->second);
            if (out.back().dimension() != out.front().dimension()) {
                throw BackendError("embedding fixture '" + path_ +
                                   "' returned inconsistent dimensions (" +
                                   std::to_string(out.front().dimension()) + " vs " +
                                   std::to_string(out.back().dimension()) + " for key '" + key +
                                   "')");
            }
        }
        return out;
    }

    std::string id() const override { return id_; }
    std::size_t peak_in_flight() const override { return gate_.peak(); }

private:
    std::string path_;
    std::string id_;
    std::unordered_map<std::string, std::vector<double>> entries_;
    InFlightGate gate_;
};

class FixtureCompletionBackend final : public CompletionBackend {
public:
    explicit FixtureCompletionBackend(const BackendDescriptor& descriptor)
        : path_(descriptor.endpoint),
          id_(backend_label(descriptor, "fixture-completer")),
          gate_(descriptor.max_in_flight) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw InputError("cannot open completion fixture file '" + path_ + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json obj = parse_fixture_line(path_, line_no, line);
            try {
                Entry entry;
                entry.text = obj.at("text").get<std::string>();
                if (obj.contains("logprobs")) {
                    for (const auto& [token, lp] : obj.at("logprobs").items()) {
                        entry.logprobs[token] = lp.get<double>();
                    }
                }
                entries_[obj.at("key").get<std::string>()] = std::move(entry);
            } catch (const json::exception& e) {
                throw InputError("fixture file '" + path_ + "' line " + std::to_string(line_no) +
                                 ": " + e.what());
            }
        }
    }

    CompletionResponse complete(const CompletionRequest& request) override {
        auto pass = gate_.enter();
        const std::string key = fixture_key_for_request(request);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            throw BackendError("completion fixture '" + path_ + "' has no entry for key '" + key +
                               "'");
        }
        CompletionResponse response;
        response.text = it->second.text;
        for (const auto& target : request.logprob_targets) {
            response.first_token_logprobs[target.name] =
                pool_target_logprob(it->second.logprobs, target);
        }
        return response;
    }

    std::string id() const override { return id_; }
    std::size_t peak_in_flight() const override { return gate_.peak(); }

private:
    struct Entry {
        std::string text;
        std::map<std::string, double> logprobs;
    };

    std::string path_;
    std::string id_;
    std::unordered_map<std::string, Entry> entries_;
    InFlightGate gate_;
};

/// Splits "http://host:port/prefix" into the client target and path prefix.
struct ParsedUrl {
    std::string host;    // scheme://authority, what httplib::Client takes
    std::string prefix;  // leading path, "" or "/x/y" without trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw InputError("endpoint '" + url + "' is not a URL (expected http://host[:port][/path])");
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http") {
        throw InputError("endpoint '" + url + "': only plain http endpoints are supported");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_start == std::string::npos) {
        parsed.host = url;
    } else {
        parsed.host = url.substr(0, path_start);
        parsed.prefix = url.substr(path_start);
        while (!parsed.prefix.empty() && parsed.prefix.back() == '/') parsed.prefix.pop_back();
    }
    if (parsed.host.size() <= scheme_end + 3) {
        throw InputError("endpoint '" + url + "' has an empty host");
    }
    return parsed;
}

/// Shared POST-with-retry plumbing for the two http backends.
class HttpTransport {
public:
    HttpTransport(const BackendDescriptor& descriptor, std::string what)
        : url_(parse_base_url(resolve_endpoint(descriptor.endpoint))),
          timeout_(descriptor.timeout),
          retry_budget_(descriptor.retry_budget < 0 ? 0 : descriptor.retry_budget),
          what_(std::move(what)) {
        const char* key = std::getenv("MISCON_API_KEY");
        if (key != nullptr && *key != '\0') api_key_ = key;
    }

    json post_json(const std::string& path, const json& body) const {
        const std::string payload = body.dump();
        const std::string target = url_.prefix + path;
        const int attempts = retry_budget_ + 1;
        std::string last_failure;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(std::chrono::milliseconds(10) * (attempt - 1));
            }
            httplib::Client client(url_.host);
            const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
            const auto micros =
                std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);
            client.set_connection_timeout(seconds.count(), micros.count());
            client.set_read_timeout(seconds.count(), micros.count());
            client.set_write_timeout(seconds.count(), micros.count());
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
            auto result = client.Post(target, headers, payload, "application/json");
            if (!result) {
                last_failure = "transport error: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status >= 500) {
                last_failure = "server error: HTTP " + std::to_string(result->status);
                continue;
            }
            if (result->status != 200) {
                throw BackendError(what_ + " request rejected: HTTP " +
                                   std::to_string(result->status) + " " +
                                   result->body.substr(0, 200));
            }
            try {
                return json::parse(result->body);
            } catch (const json::exception& e) {
                throw BackendError(what_ + " response is not valid JSON: " + std::string(e.what()));
            }
        }
        throw BackendError(what_ + " request failed after " + std::to_string(attempts) +
                           " attempt(s): " + last_failure);
    }

private:
    ParsedUrl url_;
    std::chrono::milliseconds timeout_;
    int retry_budget_;
    std::string what_;
    std::string api_key_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(const BackendDescriptor& descriptor)
        : transport_(descriptor, "embedding"),
          model_id_(descriptor.model_id),
          id_(backend_label(descriptor, "http-embedder")),
          gate_(descriptor.max_in_flight) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw InputError("embed requires at least one text");
        auto pass = gate_.enter();
        json body = {{"input", texts}};
        if (!model_id_.empty()) body["model"] = model_id_;
        const json response = transport_.post_json("/v1/embeddings", body);
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> filled(texts.size(), false);
        try {
            const auto& data = response.at("data");
            if (data.size() != texts.size()) {
                throw BackendError("embedding response has " + std::to_string(data.size()) +
                                   " vectors for " + std::to_string(texts.size()) + " inputs");
            }
            for (const auto& item : data) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= out.size() || filled[index]) {
                    throw BackendError("embedding response has a bad or repeated index " +
                                       std::to_string(index));
                }
                out[index] = EmbeddingVector(item.at("embedding").get<std::vector<double>>());
                filled[index] = true;
            }
        } catch (const json::exception& e) {
            throw BackendError("embedding response is malformed: " + std::string(e.what()));
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].dimension() != out.front().dimension()) {
                throw BackendError("embedding response has inconsistent dimensions (" +
                                   std::to_string(out.front().dimension()) + " vs " +
                                   std::to_string(out[i].dimension()) + " at index " +
                                   std::to_string(i) + ")");
            }
        }
        return out;
    }

    std::string id() const override { return id_; }
    std::size_t peak_in_flight() const override { return gate_.peak(); }

private:
    HttpTransport transport_;
    std::string model_id_;
    std::string id_;
    InFlightGate gate_;
};

class HttpCompletionBackend final : public CompletionBackend {
public:
    explicit HttpCompletionBackend(const BackendDescriptor& descriptor)
        : transport_(descriptor, "completion"),
          model_id_(descriptor.model_id),
          id_(backend_label(descriptor, "http-completer")),
          gate_(descriptor.max_in_flight) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        auto pass = gate_.enter();
        json messages = json::array();
        for (const auto& m : request.messages) {
            messages.push_back({{"role", m.role}, {"content", m.content}});
        }
        json body = {{"messages", std::move(messages)},
                     {"temperature", request.sampling.temperature},
                     {"seed", request.sampling.seed},
                     {"max_tokens", request.sampling.max_tokens}};
        if (!model_id_.empty()) body["model"] = model_id_;
        if (!request.logprob_targets.empty()) {
            body["logprobs"] = true;
            body["top_logprobs"] = 20;
        }
        const json response = transport_.post_json("/v1/chat/completions", body);
        CompletionResponse out;
        try {
            const auto& choice = response.at("choices").at(0);
            out.text = choice.at("message").at("content").get<std::string>();
            if (!request.logprob_targets.empty()) {
                if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
                    throw BackendError(
                        "completion backend did not return log-probabilities although targets "
                        "were requested");
                }
                const auto& content = choice.at("logprobs").at("content");
                if (content.empty()) {
                    throw BackendError("completion response carries an empty logprobs block");
                }
                std::map<std::string, double> alternatives;
                for (const auto& alt : content.at(0).at("top_logprobs")) {
                    const auto token = alt.at("token").get<std::string>();
                    const auto lp = alt.at("logprob").get<double>();
                    auto [it, inserted] = alternatives.emplace(token, lp);
                    if (!inserted) it->second = std::max(it->second, lp);
                }
                for (const auto& target : request.logprob_targets) {
                    out.first_token_logprobs[target.name] =
                        pool_target_logprob(alternatives, target);
                }
            }
        } catch (const json::exception& e) {
            throw BackendError("completion response is malformed: " + std::string(e.what()));
        }
        return out;
    }

    std::string id() const override { return id_; }
    std::size_t peak_in_flight() const override { return gate_.peak(); }

private:
    HttpTransport transport_;
    std::string model_id_;
    std::string id_;
    InFlightGate gate_;
};

}  // namespace

struct FixtureWriter::Impl {
    std::ofstream out;
};

FixtureWriter::FixtureWriter(const std::string& path, bool append) : impl_(new Impl) {
    impl_->out.open(path, append ? (std::ios::binary | std::ios::app) : std::ios::binary);
    if (!impl_->out) throw InputError("cannot open fixture file '" + path + "' for writing");
}

FixtureWriter::~FixtureWriter() = default;

void FixtureWriter::add_embedding(std::string_view text, const std::vector<double>& vector) {
    json obj = {{"key", fixture_key_for_text(text)}, {"vector", vector}};
    impl_->out << obj.dump() << '\n';
}

void FixtureWriter::add_completion(const CompletionRequest& request, std::string_view text,
                                   const std::map<std::string, double>& logprobs) {
    json obj = {{"key", fixture_key_for_request(request)}, {"text", std::string(text)}};
    if (!logprobs.empty()) obj["logprobs"] = logprobs;
    impl_->out << obj.dump() << '\n';
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendDescriptor& descriptor) {
    switch (descriptor.kind) {
        case BackendKind::fixture:
            return std::make_unique<FixtureEmbeddingBackend>(descriptor);
        case BackendKind::http:
            return std::make_unique<HttpEmbeddingBackend>(descriptor);
    }
    throw InputError("unknown backend kind");
}

std::unique_ptr<CompletionBackend> make_completion_backend(const BackendDescriptor& descriptor) {
    switch (descriptor.kind) {
        case BackendKind::fixture:
            return std::make_unique<FixtureCompletionBackend>(descriptor);
        case BackendKind::http:
            return std::make_unique<HttpCompletionBackend>(descriptor);
    }
    throw InputError("unknown backend kind");
}

}  // namespace miscon
