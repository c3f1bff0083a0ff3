#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace dcot::inference {

struct GenerationParams {
    std::string model;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 512;
    /// Distinguishes repeated stochastic draws of the same prompt.
    int sample_index = 0;
    std::vector<std::string> stop;

    bool operator==(const GenerationParams&) const = default;
};

struct Usage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

enum class Source { network, cache, mock };
std::string_view to_string(Source s);

struct CompletionRecord {
    std::string request_id;
    std::string prompt;
    GenerationParams params;
    std::string completion;
    Usage usage;
    Source source = Source::network;
    int attempts = 0;
    /// Set by the mock backend when no script rule matched.
    bool unmatched = false;
};

void to_json(nlohmann::json& j, const GenerationParams& p);
void from_json(const nlohmann::json& j, GenerationParams& p);
void to_json(nlohmann::json& j, const CompletionRecord& r);
void from_json(const nlohmann::json& j, CompletionRecord& r);

/// Lowercase hex SHA-256 of the compact JSON object
/// {"max_tokens","model","prompt","sample_index","stop","temperature","top_p"}
/// with keys in that (sorted) order.
std::string request_id(const std::string& prompt, const GenerationParams& params);

/// Every retry exhausted or a non-retryable HTTP status.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, std::vector<std::string> attempt_log)
        : std::runtime_error(what), attempt_log_(std::move(attempt_log)) {}
    const std::vector<std::string>& attempt_log() const { return attempt_log_; }

private:
    std::vector<std::string> attempt_log_;
};

/// The endpoint answered with a body that is not a completion.
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(const std::string& what, std::string raw_body)
        : std::runtime_error(what), raw_body_(std::move(raw_body)) {}
    const std::string& raw_body() const { return raw_body_; }

private:
    std::string raw_body_;
};

/// Outcome of a single attempt against a backend.
struct Attempt {
    enum class Kind { ok, retryable, fatal, malformed };
    Kind kind = Kind::ok;
    int status = 200;
    std::string completion;
    Usage usage;
    std::string body;   ///< raw response body for protocol errors
    std::string error;  ///< human readable reason for failures
    bool unmatched = false;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Attempt attempt(const std::string& prompt, const GenerationParams& params) = 0;
    virtual Source source() const { return Source::network; }
};

/// Adapts a callable; handy for tests and fault injection.
class FunctionBackend : public Backend {
public:
    using Fn = std::function<Attempt(const std::string&, const GenerationParams&)>;
    explicit FunctionBackend(Fn fn, Source source = Source::mock) : fn_(std::move(fn)), source_(source) {}
    Attempt attempt(const std::string& prompt, const GenerationParams& params) override { return fn_(prompt, params); }
    Source source() const override { return source_; }

private:
    Fn fn_;
    Source source_;
};

/// Append-only JSONL store of CompletionRecords keyed by request_id. An empty
/// path keeps the cache in memory only. Safe for concurrent use.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(const std::filesystem::path& path);

    std::optional<CompletionRecord> lookup(const std::string& id) const;
    void append(const CompletionRecord& record);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, CompletionRecord> records_;
    std::filesystem::path path_;
    std::ofstream out_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    /// Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct Request {
    std::string prompt;
    GenerationParams params;
};

struct BatchItem {
    std::optional<CompletionRecord> record;
    std::string error;

    bool ok() const { return record.has_value(); }
};

/// Cache-first completion client. Concurrent identical requests share one
/// backend call.
class Client {
public:
    Client(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache, RetryPolicy retry = {});

    /// Throws TransportError or ProtocolError.
    CompletionRecord complete(const std::string& prompt, const GenerationParams& params);

    /// Results in request order; at most `limit` requests in flight. Failures
    /// are reported per item.
    std::vector<BatchItem> complete_batch(const std::vector<Request>& requests, std::size_t limit);

    /// Backend attempts made so far (each retry counts).
    std::size_t backend_calls() const { return backend_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    CompletionRecord fetch(const std::string& id, const std::string& prompt, const GenerationParams& params);

    std::shared_ptr<Backend> backend_;
    std::shared_ptr<ResponseCache> cache_;
    RetryPolicy retry_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::mutex pending_mutex_;
    std::map<std::string, std::shared_future<CompletionRecord>> pending_;
};

enum class ApiShape { completions, chat };

struct EndpointConfig {
    /// Base URL, e.g. "http://localhost:8000" or "https://api.openai.com/v1".
    std::string url;
    std::string api_key;
    ApiShape api = ApiShape::completions;
    std::chrono::seconds timeout{120};
};

/// OpenAI-compatible HTTP backend (`/v1/completions`, or
/// `/v1/chat/completions` with the prompt as a single user message).
class OpenAIBackend : public Backend {
public:
    explicit OpenAIBackend(EndpointConfig config);
    Attempt attempt(const std::string& prompt, const GenerationParams& params) override;

    /// Request body sent for (prompt, params); exposed for tests.
    nlohmann::json request_body(const std::string& prompt, const GenerationParams& params) const;
    const std::string& path() const { return path_; }

private:
    EndpointConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

/// Completion returned for prompts no script rule matches.
inline constexpr std::string_view kMockUnmatched = "<<dcot-mock: unmatched prompt>>";

/// Deterministic scripted backend. Rules are tried in order; the first whose
/// prompt predicate, optional model and optional sample_index all match wins.
class MockBackend : public Backend {
public:
    struct Rule {
        std::function<bool(const std::string&)> matches;
        std::optional<int> sample_index;
        std::optional<std::string> model;
        std::string completion;
        /// Non-200 makes the attempt fail with this HTTP status.
        int status = 200;
    };

    MockBackend() = default;
    explicit MockBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}

    /// Script file schema:
    ///   {"rules": [{"prompt": "...exact..." | "contains": "..." | "regex": "...",
    ///               "sample_index": 0, "model": "m", "completion": "...", "status": 200}],
    ///    "default": "...optional completion for unmatched prompts..."}
    static MockBackend from_json(const nlohmann::json& script);
    static MockBackend from_file(const std::filesystem::path& path);

    void add_exact(std::string prompt, std::string completion, std::optional<int> sample_index = std::nullopt);
    void add(Rule rule) {
        pattern_rules_.push_back(rules_.size());
        rules_.push_back(std::move(rule));
    }

    /// Called on every attempt before matching (latency / concurrency probes).
    void set_hook(std::function<void(const std::string&, const GenerationParams&)> hook) { hook_ = std::move(hook); }

    Attempt attempt(const std::string& prompt, const GenerationParams& params) override;
    Source source() const override { return Source::mock; }

private:
    std::vector<Rule> rules_;
    std::unordered_map<std::string, std::vector<std::size_t>> exact_;
    std::vector<std::size_t> pattern_rules_;
    std::optional<std::string> default_;
    std::function<void(const std::string&, const GenerationParams&)> hook_;
};

}  // namespace dcot::inference
