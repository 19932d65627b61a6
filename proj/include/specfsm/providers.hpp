#pragma once

#include "specfsm/prompting.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <string>
#include <vector>

namespace specfsm {

struct ProviderConfig {
    std::string name;
    std::string endpoint_url;
    std::string model_id;
    std::string api_key_env;
    double temperature = 0.2;
    int max_retries = 4;
    double timeout_seconds = 120.0;
};

struct LlmExchange {
    std::string provider;
    std::string prompt_sha256;
    std::string response_text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t latency_ms = 0;
    int attempt = 0;
    std::string error;  // empty on success, otherwise the ErrorKind name
    std::string phase;
    int window_id = -1;

    friend bool operator==(const LlmExchange&, const LlmExchange&) = default;
};

void to_json(nlohmann::json& j, const LlmExchange& e);
void from_json(const nlohmann::json& j, LlmExchange& e);

std::string prompt_sha256(const PromptBundle& bundle);

/// Append-only, thread-safe sink of exchange records.
class ExchangeLog {
public:
    void append(LlmExchange e);
    std::vector<LlmExchange> snapshot() const;
    std::size_t size() const;

    /// JSON Lines, one exchange per line.
    void write_jsonl(const std::filesystem::path& path) const;
    static std::vector<LlmExchange> read_jsonl(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::vector<LlmExchange> entries_;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual const std::string& name() const = 0;
    /// Appends exactly one record to `log` per call, failed calls included.
    virtual LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) = 0;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    double timeout_seconds = 60.0;
};

struct HttpResponse {
    enum class Failure { None, Connection, Timeout };
    int status = 0;
    std::string body;
    Failure failure = Failure::None;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib transport with TLS support.
std::shared_ptr<HttpTransport> make_default_transport();

struct RetryPolicy {
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    double jitter = 0.2;  // +/- fraction applied to each delay
    std::optional<std::uint64_t> seed;
};

/// Backoff before retry number `retry` (1-based), jitter drawn from `u` in [0,1).
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, double u);

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

std::optional<std::string> lookup_env(const std::string& name);

/// Builds the OpenAI-compatible chat-completions request body.
nlohmann::json chat_request_body(const ProviderConfig& cfg, const PromptBundle& bundle);

/// OpenAI-compatible chat-completions client. Retries transport failures,
/// timeouts, 429 and 5xx; 401/403 fail immediately.
class HttpChatProvider final : public ChatProvider {
public:
    HttpChatProvider(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {},
                     Sleeper sleeper = {}, EnvLookup env = lookup_env);

    const std::string& name() const override { return cfg_.name; }
    LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) override;

private:
    ProviderConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    Sleeper sleeper_;
    EnvLookup env_;
    std::mutex rng_mu_;
    std::uint64_t rng_state_;
};

// ---------------------------------------------------------------------------
// Replay

struct ReplayRecord {
    std::string response_text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t latency_ms = 0;
};

/// Serves {hash}.json files from a fixture directory; a miss raises
/// Error(FixtureMiss) naming the hash.
class ReplayProvider final : public ChatProvider {
public:
    ReplayProvider(std::string name, std::filesystem::path fixture_dir);

    const std::string& name() const override { return name_; }
    LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) override;

private:
    std::string name_;
    std::filesystem::path dir_;
};

std::unique_ptr<ChatProvider> replay_provider(std::string name, const std::filesystem::path& fixture_dir);

void write_replay_record(const std::filesystem::path& fixture_dir, const std::string& hash, const ReplayRecord& r);

/// Answers from a callback; used to author replay fixtures and in tests.
class ScriptedProvider final : public ChatProvider {
public:
    using Script = std::function<std::string(const PromptBundle&)>;

    ScriptedProvider(std::string name, Script script);

    const std::string& name() const override { return name_; }
    LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) override;

private:
    std::string name_;
    Script script_;
};

// ---------------------------------------------------------------------------
// Concurrency

/// Global and per-provider caps on in-flight calls.
class ConcurrencyLimiter {
public:
    ConcurrencyLimiter(std::size_t global_cap = 4, std::size_t per_provider_cap = 2);

    class Permit {
    public:
        Permit(ConcurrencyLimiter* owner, std::string provider) : owner_(owner), provider_(std::move(provider)) {}
        Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)), provider_(std::move(other.provider_)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit();

    private:
        ConcurrencyLimiter* owner_;
        std::string provider_;
    };

    Permit acquire(const std::string& provider);
    std::size_t peak_in_flight() const;

private:
    void release(const std::string& provider);

    std::size_t global_cap_;
    std::size_t per_provider_cap_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
    std::map<std::string, std::size_t> per_provider_;
};

/// Decorator routing every call of `inner` through a shared limiter.
class LimitedProvider final : public ChatProvider {
public:
    LimitedProvider(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ConcurrencyLimiter> limiter)
        : inner_(std::move(inner)), limiter_(std::move(limiter)) {}

    const std::string& name() const override { return inner_->name(); }
    LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) override;

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<ConcurrencyLimiter> limiter_;
};

// ---------------------------------------------------------------------------
// Cost accounting

struct CostRow {
    std::string provider;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double wall_minutes = 0.0;
    std::size_t calls = 0;
};

/// Per-provider sums ordered by provider name; wall_minutes is the summed
/// observed latency.
std::vector<CostRow> cost_report(const std::vector<LlmExchange>& exchanges);
std::string render_cost_table(const std::vector<CostRow>& rows);

}  // namespace specfsm
