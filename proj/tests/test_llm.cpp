// SPDX-License-Identifier: Apache-2.0
#include "rightpath/llm.hpp"

#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace rightpath;
using namespace rightpath::llm;

namespace {

ChatRequest simple_request(bool json = false) {
    ChatRequest r;
    r.messages = {{Role::system, "sys"}, {Role::user, "hello"}};
    r.expects_json = json;
    return r;
}

class FailingProvider : public Provider {
public:
    explicit FailingProvider(std::vector<std::optional<ErrorKind>> plan) : plan_(std::move(plan)) {}
    ChatResponse send(const ChatRequest&) override {
        auto step = plan_.at(calls_++);
        if (step) throw LlmError(*step, "scripted failure");
        return {"ok", "m", {}};
    }
    std::string name() const override { return "failing"; }
    size_t calls_ = 0;

private:
    std::vector<std::optional<ErrorKind>> plan_;
};

// Local stand-in for a provider endpoint. Records the last body it saw.
struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::string last_body;
    httplib::Headers last_headers;
    std::string last_path;
    std::mutex mutex;

    explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server.Post(R"(.*)", [this, handler](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex);
                last_body = req.body;
                last_headers = req.headers;
                last_path = req.path;
            }
            handler(req, res);
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint() {
        server.stop();
        thread.join();
    }
    std::string base() const { return "http://127.0.0.1:" + std::to_string(port); }
    nlohmann::json body() {
        std::lock_guard lock(mutex);
        return nlohmann::json::parse(last_body);
    }
};

} // namespace

TEST_CASE("request validation") {
    ChatRequest r;
    CHECK_THROWS_AS(r.validate(), ContractViolation);
    r.messages = {{Role::user, "a"}, {Role::system, "late"}};
    CHECK_THROWS_AS(r.validate(), ContractViolation);
    r.messages = {{Role::user, "a"}};
    r.temperature = 2.5;
    CHECK_THROWS_AS(r.validate(), ContractViolation);
    r.temperature = 0.0;
    CHECK_NOTHROW(r.validate());
}

TEST_CASE("strict-JSON instruction is added only for providers without a JSON mode") {
    ScriptedProvider native(ScriptedProvider::texts({"{}"}));
    complete(simple_request(true), native);
    CHECK(native.requests().at(0).messages.back().content == "hello");

    class Plain : public Provider {
    public:
        ChatResponse send(const ChatRequest& r) override {
            seen = r;
            return {"{}", "plain", {}};
        }
        std::string name() const override { return "plain"; }
        ChatRequest seen;
    } plain;
    complete(simple_request(true), plain);
    CHECK(plain.seen.messages.back().content == std::string("hello\n\n") + strict_json_instruction);
    complete(simple_request(false), plain);
    CHECK(plain.seen.messages.back().content == "hello");
}

TEST_CASE("mock provider looks responses up by request digest") {
    auto req = simple_request();
    MockProvider mock({{request_digest(req), "pong"}});
    CHECK(complete(req, mock).text == "pong");
    CHECK(mock.calls() == 1);
    auto other = simple_request(true);
    CHECK(request_digest(other) != request_digest(req));
    try {
        complete(other, mock);
        FAIL("expected replay miss");
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::replay_miss);
    }
}

TEST_CASE("scripted provider serves steps in order and then misses") {
    ScriptedProvider p({{"one", std::nullopt}, {"", ErrorKind::rate_limit}});
    CHECK(p.send(simple_request()).text == "one");
    CHECK_THROWS_AS(p.send(simple_request()), LlmError);
    try {
        p.send(simple_request());
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::replay_miss);
    }
    CHECK(p.calls() == 3);
}

TEST_CASE("scripted steps load from a file") {
    testing::TempDir dir("steps");
    auto path = dir.path() / "steps.json";
    std::ofstream(path) << R"(["a", {"text": "b"}, {"error": "timeout"}])";
    auto steps = ScriptedProvider::load_steps(path);
    REQUIRE(steps.size() == 3);
    CHECK(steps[1].text == "b");
    CHECK(steps[2].error == ErrorKind::timeout);
}

TEST_CASE("retries cover transient failures only") {
    std::vector<std::chrono::milliseconds> delays;
    RetryPolicy policy;
    policy.max_attempts = 4;
    policy.initial_backoff = std::chrono::milliseconds(100);
    policy.jitter = 0.0;
    policy.sleep = [&](std::chrono::milliseconds d) { delays.push_back(d); };

    FailingProvider flaky({ErrorKind::transport, ErrorKind::rate_limit, std::nullopt});
    auto r = complete_with_retries(simple_request(), flaky, policy);
    CHECK(r.attempts == 3);
    CHECK(r.response.text == "ok");
    REQUIRE(delays.size() == 2);
    CHECK(delays[0].count() == 100);
    CHECK(delays[1].count() == 200);

    FailingProvider auth({ErrorKind::auth});
    CHECK_THROWS_AS(complete_with_retries(simple_request(), auth, policy), LlmError);
    CHECK(auth.calls_ == 1);

    FailingProvider down({ErrorKind::timeout, ErrorKind::timeout, ErrorKind::timeout, ErrorKind::timeout});
    try {
        complete_with_retries(simple_request(), down, policy);
        FAIL("expected exhaustion");
    } catch (const AttemptsExhausted& e) {
        CHECK(e.attempts() == 4);
        CHECK(e.last_kind() == ErrorKind::timeout);
    }
}

TEST_CASE("backoff is capped and jitter stays within its band") {
    RetryPolicy policy;
    policy.max_attempts = 8;
    policy.initial_backoff = std::chrono::milliseconds(1000);
    policy.max_backoff = std::chrono::milliseconds(3000);
    policy.jitter = 0.25;
    std::vector<long> delays;
    policy.sleep = [&](std::chrono::milliseconds d) { delays.push_back(d.count()); };
    FailingProvider down(std::vector<std::optional<ErrorKind>>(8, ErrorKind::transport));
    CHECK_THROWS_AS(complete_with_retries(simple_request(), down, policy), AttemptsExhausted);
    REQUIRE(delays.size() == 7);
    double nominal = 1000;
    for (auto d : delays) {
        double capped = std::min(nominal, 3000.0);
        CHECK(d >= static_cast<long>(capped * 0.75) - 1);
        CHECK(d <= static_cast<long>(capped * 1.25) + 1);
        nominal *= 2;
    }
}

TEST_CASE("record then replay serves identical responses without the live backend") {
    testing::TempDir dir("transcript");
    auto path = dir.path() / "t.jsonl";
    auto live = std::make_shared<ScriptedProvider>(ScriptedProvider::texts({"first", "second"}));
    auto rec = record_replay(TranscriptMode::record, path, live);
    auto a = simple_request();
    auto b = simple_request(true);
    CHECK(complete(a, *rec).text == "first");
    CHECK(complete(b, *rec).text == "second");

    auto replay = record_replay(TranscriptMode::replay, path);
    CHECK(complete(a, *replay).text == "first");
    CHECK(complete(b, *replay).text == "second");
    CHECK(complete(a, *replay).model_id == "scripted");
    CHECK(live->calls() == 2);

    ChatRequest unseen = simple_request();
    unseen.messages.back().content = "different";
    try {
        complete(unseen, *replay);
        FAIL("expected replay miss");
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::replay_miss);
    }
}

TEST_CASE("corrupt transcript lines are reported with their line number") {
    testing::TempDir dir("corrupt");
    auto path = dir.path() / "t.jsonl";
    std::ofstream(path) << "\n{not json}\n";
    TranscriptStore store(path);
    try {
        store.load();
        FAIL("expected store_corrupt");
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::store_corrupt);
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
}

TEST_CASE("concurrency cap bounds in-flight requests") {
    class Slow : public Provider {
    public:
        ChatResponse send(const ChatRequest&) override {
            int now = ++inflight;
            int seen = peak.load();
            while (now > seen && !peak.compare_exchange_weak(seen, now)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            --inflight;
            return {"x", "slow", {}};
        }
        std::string name() const override { return "slow"; }
        std::atomic<int> inflight{0}, peak{0};
    };
    auto slow = std::make_shared<Slow>();
    ConcurrencyLimitedProvider limited(slow, 2);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { limited.send(simple_request()); });
    for (auto& t : threads) t.join();
    CHECK(slow->peak.load() <= 2);
    CHECK(slow->peak.load() >= 1);
}

TEST_CASE("openai adapter speaks the chat completions protocol") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"model":"gpt-test","choices":[{"message":{"content":"{\"ok\":true}"}}],
                           "usage":{"prompt_tokens":12,"completion_tokens":3}})",
                        "application/json");
    });
    auto p = make_openai_provider({"sk-test", "gpt-test", ep.base() + "/", std::chrono::seconds(5)});
    auto r = complete(simple_request(true), *p);
    CHECK(r.text == R"({"ok":true})");
    CHECK(r.model_id == "gpt-test");
    CHECK(r.usage.input_tokens == 12);
    CHECK(ep.last_path == "/v1/chat/completions");
    CHECK(ep.last_headers.find("Authorization")->second == "Bearer sk-test");
    auto body = ep.body();
    CHECK(body["response_format"]["type"] == "json_object");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hello");
}

TEST_CASE("anthropic adapter lifts the system prompt and gets the JSON instruction") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"model":"claude-test","content":[{"type":"text","text":"{}"}],
                           "usage":{"input_tokens":5,"output_tokens":1}})",
                        "application/json");
    });
    auto p = make_anthropic_provider({"key", "claude-test", ep.base(), std::chrono::seconds(5)});
    auto r = complete(simple_request(true), *p);
    CHECK(r.text == "{}");
    CHECK(ep.last_path == "/v1/messages");
    CHECK(ep.last_headers.find("x-api-key")->second == "key");
    auto body = ep.body();
    CHECK(body["system"] == "sys");
    REQUIRE(body["messages"].size() == 1);
    CHECK(body["messages"][0]["content"].get<std::string>().ends_with(strict_json_instruction));
}

TEST_CASE("gemini adapter maps roles and JSON mode") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"modelVersion":"gemini-test-001","candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}]})",
                        "application/json");
    });
    auto p = make_gemini_provider({"gk", "gemini-test", ep.base(), std::chrono::seconds(5)});
    ChatRequest req = simple_request(true);
    req.messages.push_back({Role::assistant, "prior"});
    req.messages.push_back({Role::user, "again"});
    auto r = complete(req, *p);
    CHECK(r.text == "ab");
    CHECK(r.model_id == "gemini-test-001");
    CHECK(ep.last_path == "/v1beta/models/gemini-test:generateContent");
    auto body = ep.body();
    CHECK(body["systemInstruction"]["parts"][0]["text"] == "sys");
    CHECK(body["contents"][1]["role"] == "model");
    CHECK(body["generationConfig"]["responseMimeType"] == "application/json");
}

TEST_CASE("adapter errors are classified") {
    int status = 0;
    std::string content;
    FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
        res.status = status;
        res.set_content(content, "application/json");
    });
    auto p = make_openai_provider({"k", "m", ep.base(), std::chrono::seconds(5)});
    auto kind_of = [&](int s, std::string body) {
        status = s;
        content = std::move(body);
        try {
            p->send(simple_request());
        } catch (const LlmError& e) {
            return e.kind();
        }
        FAIL("expected an error");
        return ErrorKind::bad_response;
    };
    CHECK(kind_of(401, "{}") == ErrorKind::auth);
    CHECK(kind_of(429, "{}") == ErrorKind::rate_limit);
    CHECK(kind_of(503, "{}") == ErrorKind::transport);
    CHECK(kind_of(200, "not json") == ErrorKind::bad_response);
    CHECK(kind_of(200, R"({"choices":[]})") == ErrorKind::bad_response);
}

TEST_CASE("slow endpoints time out and closed ports are transport errors") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content("{}", "application/json");
    });
    auto slow = make_openai_provider({"k", "m", ep.base(), std::chrono::seconds(1)});
    try {
        slow->send(simple_request());
        FAIL("expected timeout");
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::timeout);
    }

    httplib::Server probe;
    int closed_port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    auto dead = make_openai_provider({"k", "m", "http://127.0.0.1:" + std::to_string(closed_port), std::chrono::seconds(2)});
    try {
        dead->send(simple_request());
        FAIL("expected transport error");
    } catch (const LlmError& e) {
        CHECK(is_retryable(e.kind()));
    }
}

TEST_CASE("live provider construction needs a credential") {
    ::unsetenv("OPENAI_API_KEY");
    try {
        make_provider("openai", "");
        FAIL("expected auth error");
    } catch (const LlmError& e) {
        CHECK(e.kind() == ErrorKind::auth);
    }
    CHECK_THROWS_AS(make_provider("nonsense", ""), ContractViolation);
    CHECK(credential_variable("gemini") == "GEMINI_API_KEY");
}
