// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/error.hpp"
#include "rightpath/llm.hpp"
#include "rightpath/text.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace rightpath::discovery {

// ---------------------------------------------------------------------------
// Fetching

struct FetchLimits {
    size_t max_bytes = 2 * 1024 * 1024;
    int max_redirects = 5;
    std::chrono::milliseconds timeout{15000};
    std::string user_agent = "rightpath/0.1 (+privacy-rights assistant)";
};

struct RawPage {
    int status = 0;
    std::string final_url;
    std::string html;
    std::string content_type;
    bool truncated = false;
};

enum class FetchErrorKind { bad_url, network, http_status, content_type, timeout, redirect_limit };

std::string to_string(FetchErrorKind kind);

class FetchError : public Error {
public:
    FetchError(FetchErrorKind kind, std::string url, const std::string& message, int status = 0);
    FetchErrorKind kind() const noexcept { return kind_; }
    const std::string& url() const noexcept { return url_; }
    int status() const noexcept { return status_; }

private:
    FetchErrorKind kind_;
    std::string url_;
    int status_;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    virtual RawPage fetch(const std::string& url, const FetchLimits& limits) const = 0;
};

/// Live HTTP(S) GET following redirects manually so hops can be counted.
class HttpFetcher : public PageFetcher {
public:
    RawPage fetch(const std::string& url, const FetchLimits& limits) const override;
};

/// Serves a static site tree from disk: `<root>/<host>/<path>`. A path
/// naming a directory serves its index.html; a missing extension also tries
/// "<path>.html". A sibling file "<name>.redirect" holding a URL answers with
/// a 302 to that URL.
class DirectoryFetcher : public PageFetcher {
public:
    explicit DirectoryFetcher(std::filesystem::path root);
    RawPage fetch(const std::string& url, const FetchLimits& limits) const override;

private:
    std::filesystem::path root_;
};

RawPage fetch_page(const std::string& url, const FetchLimits& limits, const PageFetcher& fetcher);
RawPage fetch_page(const std::string& url, const FetchLimits& limits = {});

// ---------------------------------------------------------------------------
// Candidate links

enum class Region { footer, nav, header, body };

std::string to_string(Region region);

struct CandidateLink {
    std::string url; // absolute, fragment stripped
    std::string anchor_text;
    Region region = Region::body;
    bool same_origin = false;      // same host as the page, ignoring scheme and a "www." prefix
    bool path_privacy_hint = false; // path contains "/privacy"
    size_t document_order = 0;

    friend bool operator==(const CandidateLink&, const CandidateLink&) = default;
};

/// Every http(s) anchor in document order, resolved against `base_url`,
/// de-duplicated by (url, anchor_text). mailto:, javascript:, tel: and
/// fragment-only hrefs are skipped.
std::vector<CandidateLink> harvest_links(std::string_view html, const std::string& base_url);

struct ScoredCandidate {
    CandidateLink link;
    int score = 0;
};

/// Rubric weights. Positive terms follow the selector prompt's priorities,
/// negative terms its de-prioritized link kinds.
struct RankWeights {
    int privacy_title = 10;   // anchor reads "privacy policy" / "privacy notice" / "privacy statement"
    int privacy_word = 4;     // anchor mentions privacy otherwise
    int footer_or_nav = 3;
    int path_hint = 4;
    int same_origin = 2;
    int cookie = -8;
    int terms = -8;
    int do_not_sell = -8;
    int third_party = -5;     // different registrable domain
};

int score_candidate(const CandidateLink& link, const std::string& page_domain, const RankWeights& w = {});

/// Stable descending order by score; ties keep document order.
std::vector<ScoredCandidate> rank_candidates(const std::vector<CandidateLink>& candidates,
                                             const RankWeights& weights = {});

enum class Confidence { high, medium, low };
enum class SelectionMethod { heuristic, llm };

std::string to_string(Confidence c);
std::string to_string(SelectionMethod m);

struct PolicySelection {
    std::optional<std::string> selected_url;
    Confidence confidence = Confidence::low;
    std::string reason;
    SelectionMethod method = SelectionMethod::heuristic;
};

struct SelectionOptions {
    int high_confidence_margin = 5;
    size_t max_llm_candidates = 30;
    RankWeights weights{};
};

extern const char* const link_selector_prompt;

llm::ChatRequest build_link_selection_request(const std::vector<ScoredCandidate>& ranked,
                                              size_t max_candidates = 30);

/// With a backend, asks the selector prompt and accepts the answer only if
/// it names one of the candidates; every failure falls back to the heuristic.
PolicySelection select_policy_link(const std::vector<CandidateLink>& candidates, llm::Provider* llm = nullptr,
                                   const SelectionOptions& options = {});

// ---------------------------------------------------------------------------
// Readable text

/// Main-content text: script/style/nav/header/footer/aside removed, block
/// elements on their own lines, whitespace collapsed, at most one blank line
/// in a row. Uses <main> (or else <article>) when present.
std::string extract_readable_text(std::string_view html);

// ---------------------------------------------------------------------------
// Documents and discovery

struct PolicyDocument {
    std::string site;
    std::string source_url;
    std::string fetched_at;
    std::string raw_html;
    std::string readable_text;
    std::string content_hash;

    friend bool operator==(const PolicyDocument&, const PolicyDocument&) = default;
};

PolicyDocument make_policy_document(std::string site, std::string source_url, std::string raw_html,
                                    std::chrono::system_clock::time_point fetched_at);

nlohmann::json to_json(const PolicyDocument& doc);
PolicyDocument policy_document_from_json(const nlohmann::json& j);

/// File-backed policy cache, one JSON document per registrable domain.
/// Readers share, writers are exclusive.
class PolicyCache {
public:
    PolicyCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock = system_clock());

    std::optional<PolicyDocument> get(const std::string& site) const;
    void put(const PolicyDocument& doc);
    void erase(const std::string& site);

private:
    std::filesystem::path file_for(const std::string& site) const;

    std::filesystem::path dir_;
    std::chrono::seconds ttl_;
    Clock clock_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, PolicyDocument> memory_;
};

class DiscoveryFailed : public Error {
public:
    DiscoveryFailed(std::string site_url, std::vector<ScoredCandidate> ranked, const std::string& reason);
    const std::vector<ScoredCandidate>& ranked() const noexcept { return ranked_; }

private:
    std::vector<ScoredCandidate> ranked_;
};

struct DiscoveryOptions {
    const PageFetcher* fetcher = nullptr; // null selects a live HttpFetcher
    llm::Provider* llm = nullptr;         // opt-in LLM link selection
    PolicyCache* cache = nullptr;
    FetchLimits limits{};
    SelectionOptions selection{};
    Clock clock = system_clock();
};

/// fetch -> harvest -> select -> fetch policy -> extract. A fresh cache
/// entry for the site's registrable domain short-circuits every fetch.
PolicyDocument discover_policy(const std::string& site_url, const DiscoveryOptions& options = {});

} // namespace rightpath::discovery
