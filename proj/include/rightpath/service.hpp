// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/context.hpp"
#include "rightpath/discovery.hpp"
#include "rightpath/error.hpp"
#include "rightpath/guidance.hpp"
#include "rightpath/llm.hpp"
#include "rightpath/rights.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rightpath::service {

// ---------------------------------------------------------------------------
// Configuration

class ConfigError : public Error {
public:
    ConfigError(size_t line, const std::string& message);
    size_t line() const noexcept { return line_; }

private:
    size_t line_;
};

/// Read from a `key = value` file; '#' starts a comment line.
struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8787;
    std::string provider = "gemini"; // gemini | openai | anthropic | scripted:<steps file>
    std::string model;               // empty: provider default
    std::string base_url;            // empty: provider's public endpoint
    std::string transcript_mode;     // "", "record" or "replay"
    std::filesystem::path transcript_path;
    std::filesystem::path cache_dir = ".rightpath-cache";
    std::chrono::seconds cache_ttl{std::chrono::hours(24 * 7)};
    std::chrono::seconds session_ttl{std::chrono::hours(24)};
    size_t node_budget = 1500;
    int retry_attempts = 3;      // transport-level retries per LLM call
    int extraction_attempts = 3; // schema-repair attempts per extraction
    int max_in_flight = 4;
    bool llm_link_selection = true;
    std::vector<std::string> cors_origins; // empty: no CORS headers
    std::filesystem::path fixture_root;    // serve sites from disk instead of the network
};

ServiceConfig parse_config(std::string_view text);
ServiceConfig load_config(const std::filesystem::path& path);

/// Provider stack for a config: adapter (or scripted), wrapped in the
/// transcript recorder/replayer, retries and the concurrency cap.
std::shared_ptr<llm::Provider> make_service_provider(const ServiceConfig& config);

/// Provider decorator applying complete_with_retries to every call.
/// Reports native JSON mode because the inner complete call already adds
/// the strict-JSON instruction when the wrapped provider needs it.
class RetryingProvider : public llm::Provider {
public:
    RetryingProvider(std::shared_ptr<llm::Provider> inner, llm::RetryPolicy policy);
    llm::ChatResponse send(const llm::ChatRequest& request) override;
    bool native_json_mode() const override { return true; }
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<llm::Provider> inner_;
    llm::RetryPolicy policy_;
};

// ---------------------------------------------------------------------------
// Analysis

struct AnalysisCacheEntry {
    std::string site;
    std::string policy_hash;
    rights::RightsAnalysis analysis;
    std::string stored_at;
};

/// File-backed, one entry per site. An entry is served only while its
/// policy hash matches and its TTL has not lapsed.
class AnalysisCache {
public:
    AnalysisCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock = system_clock());

    std::optional<rights::RightsAnalysis> get(const std::string& site, const std::string& policy_hash) const;
    /// Latest entry for the site regardless of hash, if still within TTL.
    std::optional<AnalysisCacheEntry> latest(const std::string& site) const;
    void put(const rights::RightsAnalysis& analysis);

private:
    std::optional<AnalysisCacheEntry> load(const std::string& site) const;
    std::filesystem::path file_for(const std::string& site) const;
    bool fresh(const AnalysisCacheEntry& e) const;

    std::filesystem::path dir_;
    std::chrono::seconds ttl_;
    Clock clock_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, AnalysisCacheEntry> memory_;
};

struct AnalysisResult {
    rights::RightsAnalysis analysis;
    discovery::PolicyDocument document;
    bool cache_hit = false;
};

struct AnalysisOptions {
    discovery::FetchLimits limits{};
    discovery::SelectionOptions selection{};
    rights::ExtractionOptions extraction{};
    bool llm_link_selection = true;
    Clock clock = system_clock();
};

/// discover -> (cache | extract) with one extraction in flight per
/// (site, policy hash).
class AnalysisService {
public:
    AnalysisService(std::shared_ptr<llm::Provider> llm, std::shared_ptr<const discovery::PageFetcher> fetcher,
                    std::shared_ptr<discovery::PolicyCache> policy_cache, std::shared_ptr<AnalysisCache> cache,
                    AnalysisOptions options = {});

    AnalysisResult analyze(const std::string& url);

    /// Cached analysis and policy document for a site (registrable domain).
    std::optional<AnalysisResult> find_site(const std::string& site) const;

    int extractions() const { return extractions_.load(); }

private:
    std::shared_ptr<llm::Provider> llm_;
    std::shared_ptr<const discovery::PageFetcher> fetcher_;
    std::shared_ptr<discovery::PolicyCache> policy_cache_;
    std::shared_ptr<AnalysisCache> cache_;
    AnalysisOptions options_;
    std::atomic<int> extractions_{0};

    std::mutex flights_mutex_;
    std::map<std::pair<std::string, std::string>, std::shared_future<rights::RightsAnalysis>> flights_;
};

/// Wire document: the analysis plus `labels`, the first 25 action labels in
/// extraction order.
nlohmann::json analysis_wire(const rights::RightsAnalysis& analysis, size_t label_cap = 25);

// ---------------------------------------------------------------------------
// Sessions

/// File-backed session persistence with per-session locking. Sessions idle
/// past the TTL are marked abandoned when next read.
class SessionStore {
public:
    using IdGenerator = std::function<std::string()>;

    SessionStore(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock = system_clock(),
                 IdGenerator ids = {});

    std::string next_id();

    void insert(guidance::GuidanceSession session);

    /// Runs `fn` on a copy of the session under its lock; the copy is
    /// committed and persisted only when `fn` returns normally. Returns false
    /// when the id is unknown.
    bool with_session(const std::string& id, const std::function<void(guidance::GuidanceSession&)>& fn);

    std::optional<guidance::GuidanceSession> get(const std::string& id);

private:
    struct Slot {
        std::mutex mutex;
        guidance::GuidanceSession session;
    };

    std::shared_ptr<Slot> slot(const std::string& id);
    void persist(const guidance::GuidanceSession& session) const;
    void expire_if_idle(guidance::GuidanceSession& session) const;

    std::filesystem::path dir_;
    std::chrono::seconds ttl_;
    Clock clock_;
    IdGenerator ids_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

// ---------------------------------------------------------------------------
// HTTP API as pure handlers

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message);

class Api {
public:
    Api(std::shared_ptr<AnalysisService> analyses, std::shared_ptr<SessionStore> sessions,
        std::shared_ptr<llm::Provider> llm, guidance::GuidanceOptions guidance_options = {});

    ApiResponse analyze(const nlohmann::json& request);
    ApiResponse create_session(const nlohmann::json& request);
    ApiResponse turn(const std::string& session_id, const nlohmann::json& request);
    ApiResponse context(const std::string& session_id);
    ApiResponse complete(const std::string& session_id);
    ApiResponse get_session(const std::string& session_id);

private:
    std::shared_ptr<AnalysisService> analyses_;
    std::shared_ptr<SessionStore> sessions_;
    std::shared_ptr<llm::Provider> llm_;
    guidance::GuidanceOptions guidance_options_;
    context::ContextCache contexts_;
};

/// Everything a process needs to serve or run one-shot analyses.
struct Runtime {
    std::shared_ptr<llm::Provider> llm;
    std::shared_ptr<AnalysisService> analyses;
    std::shared_ptr<SessionStore> sessions;
    std::shared_ptr<Api> api;
};

/// Caches live under config.cache_dir/{policies,analyses,sessions}. A null
/// `llm` builds the provider stack from the config.
Runtime make_runtime(const ServiceConfig& config, Clock clock = system_clock(),
                     std::shared_ptr<llm::Provider> llm = nullptr);

/// Blocking HTTP server exposing the API:
///   POST /analyze                  {url}
///   POST /sessions                 {site, rightId, snapshot?, hints?}
///   POST /sessions/{id}/turn       {snapshot}
///   POST /sessions/{id}/context
///   POST /sessions/{id}/complete
///   GET  /sessions/{id}
///   GET  /health
class Server {
public:
    Server(std::shared_ptr<Api> api, std::vector<std::string> cors_origins);
    ~Server();

    /// Binds and serves until stop(); port 0 picks a free port.
    void listen(const std::string& host, int port);
    int bind(const std::string& host, int port);
    void serve_bound();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace rightpath::service
