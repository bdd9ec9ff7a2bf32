// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include "rightpath/text.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <deque>
#include <thread>

using namespace rightpath;
using namespace rightpath::service;
using namespace std::chrono_literals;

namespace {

const char* const site_url = "https://www.northwind-goods.test/";

// Answers navigation and context prompts from their own queues and hands
// everything else to the recorded site script.
class RoutingProvider : public llm::Provider {
public:
    RoutingProvider()
        : base_(llm::ScriptedProvider::load_steps(testing::fixture("site_llm_steps.json"))) {}

    void queue_navigation(std::string reply) {
        std::lock_guard lock(mutex_);
        navigation_.push_back(std::move(reply));
    }

    llm::ChatResponse send(const llm::ChatRequest& request) override {
        const auto& system = request.messages.front().content;
        std::lock_guard lock(mutex_);
        ++calls_;
        if (system == guidance::navigation_system_prompt) {
            if (navigation_.empty()) throw llm::LlmError(llm::ErrorKind::transport, "no navigation reply queued");
            auto text = navigation_.front();
            navigation_.pop_front();
            return {text, "router"};
        }
        if (system == context::context_system_prompt) {
            ++context_calls_;
            return {nlohmann::json{{"legal_reference", "Cal. Civ. Code 1798.120 covers this."},
                                   {"policy_excerpt", "Account > Privacy Settings > Sale and Sharing"},
                                   {"education", {{"misconception", "m"}, {"actually", "a"}}}}
                        .dump(),
                    "router"};
        }
        return base_.send(request);
    }
    bool native_json_mode() const override { return true; }
    std::string name() const override { return "router"; }

    int calls() const { return calls_; }
    int context_calls() const { return context_calls_; }

private:
    std::mutex mutex_;
    llm::ScriptedProvider base_;
    std::deque<std::string> navigation_;
    int calls_ = 0;
    int context_calls_ = 0;
};

ServiceConfig fixture_config(const std::filesystem::path& cache) {
    ServiceConfig c;
    c.fixture_root = testing::fixture("site");
    c.cache_dir = cache;
    c.provider = "scripted:" + testing::fixture("site_llm_steps.json").string();
    c.transcript_mode = "replay";
    c.transcript_path = testing::fixture("site_transcript.jsonl");
    return c;
}

Clock fixed() { return fixed_clock(*parse_utc("2026-03-10T09:00:00Z")); }

nlohmann::json snapshot_json(const std::string& url, const std::string& button_id) {
    return {{"url", url},
            {"capturedAt", "2026-03-10T09:00:05Z"},
            {"tree",
             {{"role", "RootWebArea"},
              {"name", "Account"},
              {"children",
               {{{"role", "link"}, {"name", "Account"}, {"privyId", "acct"}},
                {{"role", "button"}, {"name", "Privacy Settings"}, {"privyId", button_id}}}}}}};
}

std::string nav_reply(const std::string& id) {
    return guidance::format_guidance_response(
        {"private chain of thought", "1. Click Privacy Settings", {{"Click Privacy Settings", id}}});
}

void check_no_reasoning(const nlohmann::json& body) {
    auto text = body.dump();
    CHECK(text.find("reasoning") == std::string::npos);
    CHECK(text.find("private chain of thought") == std::string::npos);
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST_CASE("config file parses every key") {
    auto c = parse_config(R"(# local dev
listen = 0.0.0.0:9000
provider = openai
model = gpt-4o-mini
base_url = http://127.0.0.1:1234
transcript_mode = record
transcript_path = /tmp/t.jsonl
cache_dir = /tmp/cache
cache_ttl_hours = 2
session_ttl_hours = 1
node_budget = 900
retry_attempts = 5
extraction_attempts = 2
max_in_flight = 8
llm_link_selection = no
cors_origins = chrome-extension://abc, http://localhost:5173
fixture_root = /srv/sites
)");
    CHECK(c.host == "0.0.0.0");
    CHECK(c.port == 9000);
    CHECK(c.provider == "openai");
    CHECK(c.model == "gpt-4o-mini");
    CHECK(c.transcript_mode == "record");
    CHECK(c.cache_ttl == std::chrono::seconds(7200));
    CHECK(c.session_ttl == std::chrono::seconds(3600));
    CHECK(c.node_budget == 900);
    CHECK(c.retry_attempts == 5);
    CHECK(c.max_in_flight == 8);
    CHECK_FALSE(c.llm_link_selection);
    CHECK(c.cors_origins == std::vector<std::string>{"chrome-extension://abc", "http://localhost:5173"});
    CHECK(c.fixture_root == "/srv/sites");

    auto defaults = parse_config("");
    CHECK(defaults.port == 8787);
    CHECK(defaults.provider == "gemini");
}

TEST_CASE("config errors carry the line number") {
    auto line_of = [](const char* text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return size_t{999};
    };
    CHECK(line_of("provider = gemini\nnonsense") == 2);
    CHECK(line_of("\n\ncolor = blue") == 3);
    CHECK(line_of("node_budget = lots") == 1);
    CHECK(line_of("node_budget = 0") == 1);
    CHECK(line_of("listen = localhost") == 1);
    CHECK(line_of("listen = localhost:70000") == 1);
    CHECK(line_of("transcript_mode = sometimes") == 1);
    CHECK(line_of("llm_link_selection = maybe") == 1);
    CHECK(line_of("transcript_mode = replay") == 0);
    CHECK_THROWS_AS(load_config("/nonexistent/rightpath.conf"), ConfigError);
}

TEST_CASE("provider stack refuses a replay without its transcript") {
    testing::TempDir dir("svc-provider");
    auto c = fixture_config(dir.path());
    c.transcript_path = dir.path() / "absent.jsonl";
    CHECK_THROWS(make_service_provider(c));
    c.transcript_mode.clear();
    c.provider = "gemini";
    c.base_url = "http://127.0.0.1:9";
    ::unsetenv("GEMINI_API_KEY");
    ::unsetenv("GOOGLE_API_KEY");
    CHECK_THROWS_AS(make_service_provider(c), llm::LlmError);
}

// ---------------------------------------------------------------------------
// Analysis cache

TEST_CASE("analysis cache honors hash, TTL and restarts") {
    testing::TempDir dir("svc-cache");
    auto now = *parse_utc("2026-03-10T09:00:00Z");
    Clock clock = [&] { return now; };
    rights::RightsAnalysis a;
    a.site = "shop.test";
    a.policy_url = "https://shop.test/privacy";
    a.policy_hash = "h1";
    a.model_id = "m";
    a.created_at = "2026-03-10T09:00:00Z";

    AnalysisCache cache(dir.path(), 1h, clock);
    CHECK_FALSE(cache.get("shop.test", "h1"));
    cache.put(a);
    CHECK(cache.get("shop.test", "h1") == a);
    CHECK_FALSE(cache.get("shop.test", "h2"));
    CHECK(cache.latest("shop.test")->policy_hash == "h1");

    AnalysisCache reopened(dir.path(), 1h, clock);
    CHECK(reopened.get("shop.test", "h1") == a);

    now += 2h;
    CHECK_FALSE(cache.get("shop.test", "h1"));
    CHECK_FALSE(reopened.latest("shop.test"));
}

TEST_CASE("fixture site analysis replays and then comes from cache") {
    testing::TempDir dir("svc-replay");
    auto rt = make_runtime(fixture_config(dir.path()), fixed());
    auto first = rt.analyses->analyze(site_url);
    CHECK_FALSE(first.cache_hit);
    CHECK(first.analysis.site == "northwind-goods.test");
    CHECK(first.analysis.rights.size() == 4);
    for (const auto& r : first.analysis.rights) CHECK(normalized_contains(first.document.readable_text, r.excerpt));
    auto second = rt.analyses->analyze(site_url);
    CHECK(second.cache_hit);
    CHECK(second.analysis == first.analysis);
    CHECK(rt.analyses->extractions() == 1);

    auto wire = analysis_wire(first.analysis);
    REQUIRE(wire["labels"].size() == 4);
    CHECK(wire["labels"][0] == nlohmann::json{{"id", "access-data"}, {"label", "Download my data"}, {"mechanism", "link"}});
    CHECK(analysis_wire(first.analysis, 2)["labels"].size() == 2);
    CHECK(rt.analyses->find_site("northwind-goods.test"));
    CHECK_FALSE(rt.analyses->find_site("elsewhere.test"));
}

TEST_CASE("concurrent requests for one site share a single extraction") {
    testing::TempDir dir("svc-flight");
    auto rt = make_runtime(fixture_config(dir.path()), fixed());
    std::vector<std::thread> threads;
    std::vector<rights::RightsAnalysis> results(8);
    for (size_t i = 0; i < results.size(); ++i)
        threads.emplace_back([&, i] { results[i] = rt.analyses->analyze(site_url).analysis; });
    for (auto& t : threads) t.join();
    CHECK(rt.analyses->extractions() == 1);
    for (const auto& r : results) CHECK(r == results[0]);
}

// ---------------------------------------------------------------------------
// API handlers

TEST_CASE("API walks a site from analysis through every strategy") {
    testing::TempDir dir("svc-api");
    auto router = std::make_shared<RoutingProvider>();
    auto config = fixture_config(dir.path());
    config.transcript_mode.clear();
    auto rt = make_runtime(config, fixed(), router);
    auto& api = *rt.api;

    CHECK(api.analyze(nlohmann::json::object()).status == 400);
    auto analyzed = api.analyze({{"url", site_url}});
    REQUIRE(analyzed.status == 200);
    CHECK(analyzed.body["labels"].size() == 4);
    const std::string site = analyzed.body["site"];

    SUBCASE("bad session requests") {
        CHECK(api.create_session({{"site", site}}).status == 400);
        auto unknown_site = api.create_session({{"site", "nowhere.test"}, {"rightId", "x"}});
        CHECK(unknown_site.status == 404);
        CHECK(unknown_site.body["error"]["code"] == "unknown_site");
        CHECK(api.create_session({{"site", site}, {"rightId", "nope"}}).body["error"]["code"] == "unknown_right");
        CHECK(api.turn("missing", {{"snapshot", snapshot_json(site_url, "b1")}}).status == 404);
        CHECK(api.get_session("missing").status == 404);
        CHECK(api.context("missing").status == 404);
        CHECK(api.complete("../etc").status == 404);
    }

    SUBCASE("link right finishes at once") {
        auto r = api.create_session({{"site", site}, {"rightId", "access-data"}});
        CHECK(r.status == 201);
        CHECK(r.body["strategy"] == "link");
        CHECK(r.body["status"] == "completed");
        CHECK(r.body["turn"]["response_text"].get<std::string>().find(
                  "https://www.northwind-goods.test/account/data-export") != std::string::npos);
        check_no_reasoning(r.body);
    }

    SUBCASE("email right returns the draft with hints applied") {
        auto r = api.create_session(
            {{"site", site}, {"rightId", "delete-data"}, {"hints", {{"fullName", "Ada Lovelace"}}}});
        CHECK(r.status == 201);
        CHECK(r.body["emailDraft"]["to"] == "privacy@northwind-goods.test");
        CHECK(r.body["emailDraft"]["body"].get<std::string>().find("Ada Lovelace") != std::string::npos);
    }

    SUBCASE("navigation right advances turn by turn") {
        auto created = api.create_session({{"site", site}, {"rightId", "opt-out-sale"}});
        REQUIRE(created.status == 201);
        CHECK(created.body["turn"].is_null());
        CHECK(created.body["status"] == "active");
        const std::string id = created.body["sessionId"];

        CHECK(api.turn(id, nlohmann::json::object()).status == 400);
        auto dup = snapshot_json(site_url, "acct");
        CHECK(api.turn(id, {{"snapshot", dup}}).status == 400);

        router->queue_navigation(nav_reply("b1"));
        auto t1 = api.turn(id, {{"snapshot", snapshot_json(site_url + std::string("account"), "b1")}});
        REQUIRE(t1.status == 200);
        CHECK(t1.body["turnIndex"] == 1);
        CHECK(t1.body["turn"]["highlights"][0]["privyId"] == "b1");
        CHECK(t1.body["loopDetected"] == false);
        check_no_reasoning(t1.body);

        router->queue_navigation(nav_reply("b1"));
        router->queue_navigation(nav_reply("b1"));
        auto stale = api.turn(id, {{"snapshot", snapshot_json(site_url + std::string("account/privacy"), "b2")}});
        CHECK(stale.status == 409);
        CHECK(stale.body["error"]["code"] == "stale_snapshot");
        CHECK(stale.body["error"]["retry"] == "fresh_snapshot");
        CHECK(api.get_session(id).body["stepCount"] == 1);

        auto down = api.turn(id, {{"snapshot", snapshot_json(site_url + std::string("account/privacy"), "b2")}});
        CHECK(down.status == 502);
        CHECK(down.body["error"]["code"] == "backend_unavailable");

        auto ctx = api.context(id);
        REQUIRE(ctx.status == 200);
        CHECK(ctx.body["rightId"] == "opt-out-sale");
        CHECK(ctx.body["sourceUrl"] == "https://www.northwind-goods.test/legal/privacy");
        CHECK(ctx.body["fallback"] == false);
        int before = router->context_calls();
        CHECK(api.context(id).body == ctx.body);
        CHECK(router->context_calls() == before);

        auto done = api.complete(id);
        CHECK(done.status == 200);
        CHECK(done.body["status"] == "completed");
        check_no_reasoning(done.body);
        check_no_reasoning(api.get_session(id).body);
        auto after = api.turn(id, {{"snapshot", snapshot_json(site_url, "b1")}});
        CHECK(after.status == 409);
        CHECK(api.complete(id).body["status"] == "completed");
    }
}

TEST_CASE("sessions persist across stores and idle ones are abandoned") {
    testing::TempDir dir("svc-sessions");
    auto now = *parse_utc("2026-03-10T09:00:00Z");
    Clock clock = [&] { return now; };
    int next = 0;
    SessionStore store(dir.path(), 1h, clock, [&] { return "s" + std::to_string(++next); });

    rights::Right right;
    right.id = "opt-out";
    right.label = "Opt out";
    right.prompt = "How do I opt out?";
    right.excerpt = "x";
    right.mechanism = rights::Mechanism::navigation;
    right.action_value = "Settings";
    store.insert(guidance::start_session(store.next_id(), "shop.test", right, {"https://shop.test/p", std::nullopt}));

    CHECK_THROWS_AS(store.with_session("s1",
                                       [](guidance::GuidanceSession& s) {
                                           s.step_count = 7;
                                           throw std::runtime_error("abort");
                                       }),
                    std::runtime_error);
    CHECK(store.get("s1")->step_count == 0);

    SessionStore reopened(dir.path(), 1h, clock);
    CHECK(reopened.get("s1")->site == "shop.test");
    CHECK_FALSE(reopened.get("s2"));
    CHECK_FALSE(reopened.get("../s1"));

    now += 61min;
    CHECK(store.get("s1")->status == guidance::SessionStatus::abandoned);
    CHECK_THROWS_AS(SessionStore(dir.path(), 0s, clock), ContractViolation);
    SessionStore bad_ids(dir.path(), 1h, clock, [] { return std::string("Not Safe"); });
    CHECK_THROWS_AS(bad_ids.next_id(), ContractViolation);
}

// ---------------------------------------------------------------------------
// HTTP server

TEST_CASE("HTTP server routes, reports errors as JSON and applies CORS") {
    testing::TempDir dir("svc-http");
    auto rt = make_runtime(fixture_config(dir.path()), fixed());
    Server server(rt.api, {"chrome-extension://panel"});
    int port = server.bind("127.0.0.1", 0);
    std::thread serving([&] { server.serve_bound(); });

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(10, 0);
    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto analyzed = client.Post("/analyze", nlohmann::json{{"url", site_url}}.dump(), "application/json");
    REQUIRE(analyzed);
    CHECK(analyzed->status == 200);
    CHECK(nlohmann::json::parse(analyzed->body)["labels"].size() == 4);

    auto created = client.Post("/sessions", R"({"site":"northwind-goods.test","rightId":"access-data"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto id = nlohmann::json::parse(created->body)["sessionId"].get<std::string>();
    auto fetched = client.Get(("/sessions/" + id).c_str());
    REQUIRE(fetched);
    CHECK(nlohmann::json::parse(fetched->body)["status"] == "completed");

    auto bad_json = client.Post("/analyze", "{nope", "application/json");
    REQUIRE(bad_json);
    CHECK(bad_json->status == 400);
    CHECK(nlohmann::json::parse(bad_json->body)["error"]["code"] == "bad_request");

    auto missing = client.Get("/nowhere");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(nlohmann::json::parse(missing->body)["error"]["code"] == "not_found");
    auto unknown = client.Get("/sessions/abc");
    REQUIRE(unknown);
    CHECK(nlohmann::json::parse(unknown->body)["error"]["code"] == "unknown_session");

    auto preflight = client.Options("/sessions", {{"Origin", "chrome-extension://panel"}});
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "chrome-extension://panel");
    auto foreign = client.Get("/health", {{"Origin", "https://evil.test"}});
    REQUIRE(foreign);
    CHECK_FALSE(foreign->has_header("Access-Control-Allow-Origin"));

    server.stop();
    serving.join();
}
