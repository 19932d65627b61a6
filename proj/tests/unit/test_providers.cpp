#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "specfsm/error.hpp"
#include "specfsm/providers.hpp"
#include "specfsm/text.hpp"

#include "support.hpp"

#include <doctest.h>

#include <atomic>
#include <deque>
#include <thread>

using namespace specfsm;

namespace {

PromptBundle bundle(std::string user = "user text", int window = 3) {
    PromptBundle b;
    b.phase = Phase::TransitionExtraction;
    b.window_id = window;
    b.system_text = "system";
    b.user_text = std::move(user);
    return b;
}

ProviderConfig cfg(int retries = 4) {
    ProviderConfig c;
    c.name = "fake";
    c.endpoint_url = "https://example.invalid/v1/chat/completions";
    c.model_id = "m-1";
    c.api_key_env = "FAKE_KEY";
    c.max_retries = retries;
    return c;
}

std::optional<std::string> has_key(const std::string&) { return std::string("secret"); }
std::optional<std::string> no_key(const std::string&) { return std::nullopt; }

std::string completion(const std::string& content, bool usage = true) {
    nlohmann::json j{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    if (usage) j["usage"] = {{"prompt_tokens", 120}, {"completion_tokens", 7}};
    return j.dump();
}

class FakeTransport : public HttpTransport {
public:
    std::deque<HttpResponse> script;
    std::vector<HttpRequest> seen;

    HttpResponse post(const HttpRequest& r) override {
        seen.push_back(r);
        auto resp = script.front();
        if (script.size() > 1) script.pop_front();
        return resp;
    }
};

HttpResponse status(int code, std::string body = "") { return {code, std::move(body), HttpResponse::Failure::None, ""}; }

struct Recorder {
    std::vector<std::chrono::milliseconds> delays;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("prompt hash covers system, newline and user text only") {
    auto b = bundle();
    CHECK(prompt_sha256(b) == text::sha256_hex("system\nuser text"));
    auto other = b;
    other.window_id = 99;
    other.phase = Phase::StateExtraction;
    CHECK(prompt_sha256(other) == prompt_sha256(b));
}

TEST_CASE("request body is OpenAI compatible") {
    auto j = chat_request_body(cfg(), bundle());
    CHECK(j["model"] == "m-1");
    CHECK(j["temperature"] == doctest::Approx(0.2));
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["messages"][1]["content"] == "user text");
}

TEST_CASE("retry until success") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(500), status(500), status(200, completion("[]"))};
    Recorder rec;
    HttpChatProvider p(cfg(), t, RetryPolicy{std::chrono::milliseconds(1000), 2.0, 0.2, 7}, rec.sleeper(), has_key);
    ExchangeLog log;
    auto ex = p.complete(bundle(), log);
    CHECK(ex.attempt == 3);
    CHECK(ex.response_text == "[]");
    CHECK(ex.input_tokens == 120);
    CHECK(ex.output_tokens == 7);
    CHECK(ex.error.empty());
    CHECK(log.size() == 1);
    REQUIRE(rec.delays.size() == 2);
    CHECK(rec.delays[0].count() >= 800);
    CHECK(rec.delays[0].count() <= 1200);
    CHECK(rec.delays[1].count() >= 1600);
    CHECK(rec.delays[1].count() <= 2400);
    CHECK(t->seen[0].headers[0].second == "Bearer secret");
}

TEST_CASE("backoff schedule") {
    RetryPolicy p;
    CHECK(backoff_delay(p, 1, 0.5).count() == 1000);
    CHECK(backoff_delay(p, 3, 0.5).count() == 4000);
    CHECK(backoff_delay(p, 1, 0.0).count() == 800);
    CHECK(backoff_delay(p, 1, 1.0).count() == 1200);
}

TEST_CASE("429 and transport failures are retried") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(429), {0, "", HttpResponse::Failure::Connection, "refused"}, status(200, completion("ok"))};
    Recorder rec;
    HttpChatProvider p(cfg(), t, {}, rec.sleeper(), has_key);
    ExchangeLog log;
    CHECK(p.complete(bundle(), log).attempt == 3);
}

TEST_CASE("auth failures are not retried") {
    for (int code : {401, 403}) {
        auto t = std::make_shared<FakeTransport>();
        t->script = {status(code)};
        Recorder rec;
        HttpChatProvider p(cfg(), t, {}, rec.sleeper(), has_key);
        ExchangeLog log;
        CHECK(kind_of([&] { p.complete(bundle(), log); }) == ErrorKind::AuthFailure);
        CHECK(t->seen.size() == 1);
        CHECK(rec.delays.empty());
        REQUIRE(log.size() == 1);
        CHECK(log.snapshot()[0].error == "AuthFailure");
        CHECK(log.snapshot()[0].response_text.empty());
    }
}

TEST_CASE("missing key fails before any network call") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(200, completion("x"))};
    HttpChatProvider p(cfg(), t, {}, [](auto) {}, no_key);
    ExchangeLog log;
    CHECK(kind_of([&] { p.complete(bundle(), log); }) == ErrorKind::AuthFailure);
    CHECK(t->seen.empty());
    CHECK(log.size() == 1);
}

TEST_CASE("exhausted retries") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(503)};
    Recorder rec;
    HttpChatProvider p(cfg(2), t, {}, rec.sleeper(), has_key);
    ExchangeLog log;
    CHECK(kind_of([&] { p.complete(bundle(), log); }) == ErrorKind::ProviderUnavailable);
    CHECK(t->seen.size() == 3);
    CHECK(rec.delays.size() == 2);
    CHECK(log.snapshot().at(0).attempt == 3);

    auto slow = std::make_shared<FakeTransport>();
    slow->script = {{0, "", HttpResponse::Failure::Timeout, "read timeout"}};
    HttpChatProvider q(cfg(1), slow, {}, rec.sleeper(), has_key);
    CHECK(kind_of([&] { q.complete(bundle(), log); }) == ErrorKind::Timeout);
    CHECK(slow->seen.size() == 2);
}

TEST_CASE("other client errors and malformed bodies") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(404, "nope")};
    HttpChatProvider p(cfg(), t, {}, [](auto) {}, has_key);
    ExchangeLog log;
    CHECK(kind_of([&] { p.complete(bundle(), log); }) == ErrorKind::ProviderUnavailable);
    CHECK(t->seen.size() == 1);

    auto bad = std::make_shared<FakeTransport>();
    bad->script = {status(200, "{\"choices\": []}")};
    HttpChatProvider q(cfg(), bad, {}, [](auto) {}, has_key);
    CHECK(kind_of([&] { q.complete(bundle(), log); }) == ErrorKind::ProviderUnavailable);
    CHECK(log.size() == 2);
}

TEST_CASE("usage falls back to word counts") {
    auto t = std::make_shared<FakeTransport>();
    t->script = {status(200, completion("three word answer", false))};
    HttpChatProvider p(cfg(), t, {}, [](auto) {}, has_key);
    ExchangeLog log;
    auto ex = p.complete(bundle("four words of user"), log);
    CHECK(ex.input_tokens == 5);
    CHECK(ex.output_tokens == 3);
}

TEST_CASE("http transport against a local server") {
    httplib::Server server;
    std::atomic<int> calls{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 500;
            return;
        }
        auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        res.set_content(completion("echo " + body["messages"][1]["content"].get<std::string>()), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto c = cfg();
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.timeout_seconds = 5;
    HttpChatProvider p(c, make_default_transport(), {}, [](auto) {}, has_key);
    ExchangeLog log;
    auto ex = p.complete(bundle("hello"), log);
    CHECK(ex.response_text == "echo hello");
    CHECK(ex.attempt == 2);
    CHECK(auth == "Bearer secret");

    c.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    c.max_retries = 0;
    HttpChatProvider down_once(c, make_default_transport(), {}, [](auto) {}, has_key);
    CHECK(kind_of([&] { down_once.complete(bundle(), log); }) == ErrorKind::ProviderUnavailable);

    server.stop();
    th.join();
}

TEST_CASE("replay provider") {
    auto dir = support::scratch_dir("replay");
    auto b = bundle();
    write_replay_record(dir, prompt_sha256(b), {"[{\"name\":\"X\"}]", 10, 3, 1500});
    auto p = replay_provider("alpha", dir);
    ExchangeLog log;
    auto first = p->complete(b, log);
    CHECK(first.response_text == "[{\"name\":\"X\"}]");
    CHECK(first.attempt == 1);
    CHECK(first.input_tokens == 10);
    CHECK(first.latency_ms == 1500);
    CHECK(p->complete(b, log) == first);

    auto missing = bundle("something else");
    try {
        p->complete(missing, log);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FixtureMiss);
        CHECK(std::string(e.what()).find(prompt_sha256(missing)) != std::string::npos);
    }
    CHECK(log.size() == 3);
}

TEST_CASE("exchange log jsonl round-trip") {
    ExchangeLog log;
    ScriptedProvider p("s", [](const PromptBundle& b) { return "reply to " + b.user_text; });
    p.complete(bundle("a", 2), log);
    p.complete(bundle("b", 1), log);
    auto path = support::scratch_dir("log") / "x.jsonl";
    log.write_jsonl(path);
    auto back = ExchangeLog::read_jsonl(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].window_id == 1);
    CHECK(back[1].response_text == "reply to a");
}

TEST_CASE("cost report") {
    std::vector<LlmExchange> xs(2);
    xs[0].provider = xs[1].provider = "p";
    xs[0].input_tokens = 100;
    xs[1].input_tokens = 200;
    xs[0].latency_ms = 60000;
    xs[1].latency_ms = 30000;
    auto rows = cost_report(xs);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].input_tokens == 300);
    CHECK(rows[0].calls == 2);
    CHECK(rows[0].wall_minutes == doctest::Approx(1.5));
    CHECK(cost_report({}).empty());
    CHECK(render_cost_table(rows).find("300") != std::string::npos);
}

TEST_CASE("cost report over the toy exchange fixture") {
    auto rows = cost_report(ExchangeLog::read_jsonl(support::fixtures() / "toy" / "exchanges.jsonl"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].provider == "alpha");
    CHECK(rows[4].provider == "echo");
    for (const auto& r : rows) CHECK(r.calls == 12);
}

TEST_CASE("concurrency caps hold") {
    auto limiter = std::make_shared<ConcurrencyLimiter>(4, 2);
    std::atomic<int> in_flight{0};
    std::atomic<int> worst{0};
    std::map<std::string, std::atomic<int>> per;
    per["a"];
    per["b"];
    per["c"];
    std::atomic<int> worst_per{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 24; ++i) {
        std::string name = i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c");
        threads.emplace_back([&, name] {
            auto inner = std::make_shared<ScriptedProvider>(name, [&, name](const PromptBundle&) {
                int now = ++in_flight;
                int mine = ++per[name];
                worst = std::max(worst.load(), now);
                worst_per = std::max(worst_per.load(), mine);
                std::this_thread::sleep_for(std::chrono::milliseconds(3));
                --per[name];
                --in_flight;
                return std::string("[]");
            });
            LimitedProvider p(inner, limiter);
            ExchangeLog log;
            p.complete(bundle(), log);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(worst.load() <= 4);
    CHECK(worst_per.load() <= 2);
    CHECK(limiter->peak_in_flight() <= 4);
}
