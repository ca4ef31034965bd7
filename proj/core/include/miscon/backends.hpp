#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "miscon/embedding.hpp"

namespace miscon {

enum class BackendKind { fixture, http };

/// Where and how a backend is reached. For http the endpoint is a base URL
/// (or "env:VAR" to read it from the environment at construction); for
/// fixture it is the path of a JSONL replay file.
struct BackendDescriptor {
    BackendKind kind = BackendKind::fixture;
    std::string endpoint;
    std::string model_id;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_in_flight = 4;
    int retry_budget = 2;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct SamplingParams {
    double temperature = 0.0;
    std::uint64_t seed = 0;
    std::size_t max_tokens = 256;
};

/// A named group of first-token spellings whose probability mass is pooled
/// into one score. Tokenizers disagree on leading whitespace ("Yes" vs
/// " Yes"), so callers list every spelling they accept for a target.
struct LogprobTarget {
    std::string name;
    std::vector<std::string> variants;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    SamplingParams sampling;
    std::vector<LogprobTarget> logprob_targets;
};

struct CompletionResponse {
    std::string text;
    /// One entry per requested target name, log of the pooled variant mass.
    /// Empty when no targets were requested.
    std::map<std::string, double> first_token_logprobs;
};

/// Bounds concurrent backend calls and records the high-water mark so tests
/// can observe that the cap held.
class InFlightGate {
public:
    explicit InFlightGate(std::size_t limit);

    class Pass {
    public:
        Pass(Pass&& other) noexcept;
        Pass& operator=(Pass&&) = delete;
        Pass(const Pass&) = delete;
        Pass& operator=(const Pass&) = delete;
        ~Pass();

    private:
        friend class InFlightGate;
        explicit Pass(InFlightGate* gate) noexcept : gate_(gate) {}
        InFlightGate* gate_;
    };

    /// Blocks while the gate is at capacity; the returned pass releases the
    /// slot when destroyed.
    Pass enter();

    std::size_t peak() const;

private:
    void leave();

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t limit_;
    std::size_t active_ = 0;
    std::size_t peak_ = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    /// One vector per text, input order preserved, consistent dimension.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;

    /// Identifier recorded in index manifests.
    virtual std::string id() const = 0;

    /// Highest concurrency observed so far (test hook).
    virtual std::size_t peak_in_flight() const = 0;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
    virtual std::size_t peak_in_flight() const = 0;
};

/// Replay key for an embedding request: content hash of the raw text.
std::string fixture_key_for_text(std::string_view text);

/// Replay key for a completion request: content hash of the canonicalized
/// messages and sampling parameters. logprob_targets do not enter the key;
/// the scripted entry carries raw token alternatives and pooling happens at
/// replay time, so one entry serves any target configuration.
std::string fixture_key_for_request(const CompletionRequest& request);

/// Log of the pooled probability mass for one target over raw token
/// alternatives. Shared by the fixture and http adapters so both backends
/// score targets identically. Throws BackendError when no variant of the
/// target appears among the alternatives.
double pool_target_logprob(const std::map<std::string, double>& alternatives,
                           const LogprobTarget& target);

/// Builds fixture JSONL files (one object per line). Tests and capture tools
/// use this so keys always come from the same canonicalization as replay.
class FixtureWriter {
public:
    explicit FixtureWriter(const std::string& path, bool append = false);
    ~FixtureWriter();
    FixtureWriter(const FixtureWriter&) = delete;
    FixtureWriter& operator=(const FixtureWriter&) = delete;

    void add_embedding(std::string_view text, const std::vector<double>& vector);
    void add_completion(const CompletionRequest& request, std::string_view text,
                        const std::map<std::string, double>& logprobs);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendDescriptor& descriptor);
std::unique_ptr<CompletionBackend> make_completion_backend(const BackendDescriptor& descriptor);

}  // namespace miscon
