#include "specfsm/providers.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

namespace specfsm {

void to_json(nlohmann::json& j, const LlmExchange& e) {
    j = {{"provider", e.provider},         {"prompt_sha256", e.prompt_sha256}, {"response_text", e.response_text},
         {"input_tokens", e.input_tokens}, {"output_tokens", e.output_tokens}, {"latency_ms", e.latency_ms},
         {"attempt", e.attempt},           {"error", e.error},                 {"phase", e.phase},
         {"window_id", e.window_id}};
}

void from_json(const nlohmann::json& j, LlmExchange& e) {
    e.provider = j.at("provider").get<std::string>();
    e.prompt_sha256 = j.value("prompt_sha256", "");
    e.response_text = j.value("response_text", "");
    e.input_tokens = j.value("input_tokens", std::int64_t{0});
    e.output_tokens = j.value("output_tokens", std::int64_t{0});
    e.latency_ms = j.value("latency_ms", std::int64_t{0});
    e.attempt = j.value("attempt", 0);
    e.error = j.value("error", "");
    e.phase = j.value("phase", "");
    e.window_id = j.value("window_id", -1);
}

std::string prompt_sha256(const PromptBundle& bundle) { return text::sha256_hex(bundle.hashed_text()); }

// ---------------------------------------------------------------------------
// ExchangeLog

void ExchangeLog::append(LlmExchange e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
}

std::vector<LlmExchange> ExchangeLog::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t ExchangeLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void ExchangeLog::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    auto entries = snapshot();
    std::stable_sort(entries.begin(), entries.end(), [](const LlmExchange& a, const LlmExchange& b) {
        return std::tie(a.provider, a.phase, a.window_id) < std::tie(b.provider, b.phase, b.window_id);
    });
    for (const auto& e : entries) out << nlohmann::json(e).dump() << "\n";
}

std::vector<LlmExchange> ExchangeLog::read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::vector<LlmExchange> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<LlmExchange>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP provider

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, double u) {
    double base = static_cast<double>(policy.base_delay.count()) * std::pow(policy.factor, retry - 1);
    double scale = 1.0 + policy.jitter * (2.0 * u - 1.0);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(base * scale)));
}

std::optional<std::string> lookup_env(const std::string& name) {
    if (name.empty()) return std::nullopt;
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

nlohmann::json chat_request_body(const ProviderConfig& cfg, const PromptBundle& bundle) {
    return {
        {"model", cfg.model_id},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", bundle.system_text}},
                                {{"role", "user"}, {"content", bundle.user_text}}})},
        {"temperature", cfg.temperature},
    };
}

HttpChatProvider::HttpChatProvider(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport, RetryPolicy retry,
                                   Sleeper sleeper, EnvLookup env)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      retry_(retry),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      env_(std::move(env)),
      rng_state_(retry.seed.value_or(std::random_device{}())) {}

LlmExchange HttpChatProvider::complete(const PromptBundle& bundle, ExchangeLog& log) {
    LlmExchange ex;
    ex.provider = cfg_.name;
    ex.prompt_sha256 = prompt_sha256(bundle);
    ex.phase = std::string(to_string(bundle.phase));
    ex.window_id = bundle.window_id;

    auto fail = [&](ErrorKind kind, const std::string& message) -> LlmExchange {
        ex.error = std::string(to_string(kind));
        ex.response_text.clear();
        log.append(ex);
        throw Error(kind, cfg_.name + ": " + message);
    };

    auto key = env_ ? env_(cfg_.api_key_env) : std::nullopt;
    if (!key) return fail(ErrorKind::AuthFailure, "environment variable '" + cfg_.api_key_env + "' is not set");

    HttpRequest req;
    req.url = cfg_.endpoint_url;
    req.headers = {{"Authorization", "Bearer " + *key}, {"Content-Type", "application/json"}};
    req.body = chat_request_body(cfg_, bundle).dump();
    req.timeout_seconds = cfg_.timeout_seconds;

    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    };

    const int max_attempts = std::max(0, cfg_.max_retries) + 1;
    for (int attempt = 1;; ++attempt) {
        ex.attempt = attempt;
        HttpResponse resp = transport_->post(req);
        ex.latency_ms = elapsed();

        const bool retriable = resp.failure != HttpResponse::Failure::None || resp.status == 429 || resp.status >= 500;
        if (retriable) {
            std::string what = resp.failure != HttpResponse::Failure::None ? resp.error
                                                                            : "HTTP " + std::to_string(resp.status);
            if (attempt < max_attempts) {
                double u;
                {
                    std::lock_guard lock(rng_mu_);
                    std::mt19937_64 rng(rng_state_++);
                    u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                }
                auto delay = backoff_delay(retry_, attempt, u);
                spdlog::warn("{}: attempt {} failed ({}), retrying in {} ms", cfg_.name, attempt, what, delay.count());
                sleeper_(delay);
                continue;
            }
            if (resp.failure == HttpResponse::Failure::Timeout) {
                return fail(ErrorKind::Timeout, "timed out after " + std::to_string(attempt) + " attempts");
            }
            return fail(ErrorKind::ProviderUnavailable,
                        what + " after " + std::to_string(attempt) + " attempts");
        }
        if (resp.status == 401 || resp.status == 403) {
            return fail(ErrorKind::AuthFailure, "HTTP " + std::to_string(resp.status));
        }
        if (resp.status < 200 || resp.status >= 300) {
            return fail(ErrorKind::ProviderUnavailable, "HTTP " + std::to_string(resp.status) + ": " + resp.body);
        }

        try {
            auto body = nlohmann::json::parse(resp.body);
            ex.response_text = body.at("choices").at(0).at("message").at("content").get<std::string>();
            const auto usage = body.value("usage", nlohmann::json::object());
            ex.input_tokens = usage.contains("prompt_tokens")
                                  ? usage["prompt_tokens"].get<std::int64_t>()
                                  : static_cast<std::int64_t>(text::word_count(bundle.hashed_text()));
            ex.output_tokens = usage.contains("completion_tokens")
                                   ? usage["completion_tokens"].get<std::int64_t>()
                                   : static_cast<std::int64_t>(text::word_count(ex.response_text));
        } catch (const nlohmann::json::exception& e) {
            return fail(ErrorKind::ProviderUnavailable, std::string("malformed completion body: ") + e.what());
        }
        log.append(ex);
        return ex;
    }
}

// ---------------------------------------------------------------------------
// Replay and scripted providers

ReplayProvider::ReplayProvider(std::string name, std::filesystem::path fixture_dir)
    : name_(std::move(name)), dir_(std::move(fixture_dir)) {}

LlmExchange ReplayProvider::complete(const PromptBundle& bundle, ExchangeLog& log) {
    LlmExchange ex;
    ex.provider = name_;
    ex.prompt_sha256 = prompt_sha256(bundle);
    ex.phase = std::string(to_string(bundle.phase));
    ex.window_id = bundle.window_id;
    ex.attempt = 1;

    const auto path = dir_ / (ex.prompt_sha256 + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ex.error = std::string(to_string(ErrorKind::FixtureMiss));
        log.append(ex);
        throw Error(ErrorKind::FixtureMiss, name_ + ": no fixture " + ex.prompt_sha256 + ".json in " + dir_.string() +
                                                " (" + ex.phase + ", window " + std::to_string(ex.window_id) + ")");
    }
    try {
        auto j = nlohmann::json::parse(in);
        ex.response_text = j.at("response_text").get<std::string>();
        ex.input_tokens = j.value("input_tokens", std::int64_t{0});
        ex.output_tokens = j.value("output_tokens", std::int64_t{0});
        ex.latency_ms = j.value("latency_ms", std::int64_t{0});
    } catch (const nlohmann::json::exception& e) {
        ex.error = std::string(to_string(ErrorKind::Schema));
        log.append(ex);
        throw Error(ErrorKind::Schema, path.string() + ": " + e.what());
    }
    log.append(ex);
    return ex;
}

std::unique_ptr<ChatProvider> replay_provider(std::string name, const std::filesystem::path& fixture_dir) {
    return std::make_unique<ReplayProvider>(std::move(name), fixture_dir);
}

void write_replay_record(const std::filesystem::path& fixture_dir, const std::string& hash, const ReplayRecord& r) {
    std::filesystem::create_directories(fixture_dir);
    nlohmann::json j{{"response_text", r.response_text},
                     {"input_tokens", r.input_tokens},
                     {"output_tokens", r.output_tokens},
                     {"latency_ms", r.latency_ms}};
    std::ofstream out(fixture_dir / (hash + ".json"), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write fixture into " + fixture_dir.string());
    out << j.dump(2) << "\n";
}

ScriptedProvider::ScriptedProvider(std::string name, Script script)
    : name_(std::move(name)), script_(std::move(script)) {}

LlmExchange ScriptedProvider::complete(const PromptBundle& bundle, ExchangeLog& log) {
    LlmExchange ex;
    ex.provider = name_;
    ex.prompt_sha256 = prompt_sha256(bundle);
    ex.phase = std::string(to_string(bundle.phase));
    ex.window_id = bundle.window_id;
    ex.attempt = 1;
    try {
        ex.response_text = script_(bundle);
    } catch (const Error& e) {
        ex.error = std::string(to_string(e.kind()));
        log.append(ex);
        throw;
    }
    ex.input_tokens = static_cast<std::int64_t>(text::word_count(bundle.hashed_text()));
    ex.output_tokens = static_cast<std::int64_t>(text::word_count(ex.response_text));
    log.append(ex);
    return ex;
}

// ---------------------------------------------------------------------------
// Concurrency

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t global_cap, std::size_t per_provider_cap)
    : global_cap_(std::max<std::size_t>(global_cap, 1)), per_provider_cap_(std::max<std::size_t>(per_provider_cap, 1)) {}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire(const std::string& provider) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < global_cap_ && per_provider_[provider] < per_provider_cap_; });
    ++in_flight_;
    ++per_provider_[provider];
    peak_ = std::max(peak_, in_flight_);
    return Permit(this, provider);
}

void ConcurrencyLimiter::release(const std::string& provider) {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
        --per_provider_[provider];
    }
    cv_.notify_all();
}

std::size_t ConcurrencyLimiter::peak_in_flight() const {
    std::lock_guard lock(mu_);
    return peak_;
}

ConcurrencyLimiter::Permit::~Permit() {
    if (owner_ != nullptr) owner_->release(provider_);
}

LlmExchange LimitedProvider::complete(const PromptBundle& bundle, ExchangeLog& log) {
    auto permit = limiter_->acquire(inner_->name());
    return inner_->complete(bundle, log);
}

// ---------------------------------------------------------------------------
// Cost accounting

std::vector<CostRow> cost_report(const std::vector<LlmExchange>& exchanges) {
    std::map<std::string, CostRow> rows;
    std::map<std::string, std::int64_t> latency;
    for (const auto& e : exchanges) {
        auto& row = rows[e.provider];
        row.provider = e.provider;
        row.input_tokens += e.input_tokens;
        row.output_tokens += e.output_tokens;
        ++row.calls;
        latency[e.provider] += e.latency_ms;
    }
    std::vector<CostRow> out;
    for (auto& [name, row] : rows) {
        row.wall_minutes = static_cast<double>(latency[name]) / 60000.0;
        out.push_back(row);
    }
    return out;
}

std::string render_cost_table(const std::vector<CostRow>& rows) {
    std::size_t width = 8;
    for (const auto& r : rows) width = std::max(width, r.provider.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "Provider" << std::right << std::setw(16)
        << "# Input Tokens" << std::setw(16) << "# Output Tokens" << std::setw(16) << "Time (minute)" << std::setw(8)
        << "Calls"
        << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.provider << std::right << std::setw(16)
            << r.input_tokens << std::setw(16) << r.output_tokens << std::setw(16) << std::fixed
            << std::setprecision(2) << r.wall_minutes << std::setw(8) << r.calls << "\n";
    }
    return out.str();
}

}  // namespace specfsm
