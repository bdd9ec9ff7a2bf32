// SPDX-License-Identifier: Apache-2.0
#include "rightpath/discovery.hpp"

#include "rightpath/url.hpp"

#include <fstream>
#include <mutex>

namespace rightpath::discovery {

PolicyDocument make_policy_document(std::string site, std::string source_url, std::string raw_html,
                                    std::chrono::system_clock::time_point fetched_at) {
    PolicyDocument doc;
    doc.site = std::move(site);
    doc.source_url = std::move(source_url);
    doc.fetched_at = format_utc(fetched_at);
    doc.readable_text = extract_readable_text(raw_html);
    doc.raw_html = std::move(raw_html);
    doc.content_hash = sha256_hex(doc.readable_text);
    return doc;
}

nlohmann::json to_json(const PolicyDocument& doc) {
    return {{"site", doc.site},
            {"sourceUrl", doc.source_url},
            {"fetchedAt", doc.fetched_at},
            {"contentHash", doc.content_hash},
            {"readableText", doc.readable_text},
            {"rawHtml", doc.raw_html}};
}

PolicyDocument policy_document_from_json(const nlohmann::json& j) {
    PolicyDocument doc;
    doc.site = j.at("site").get<std::string>();
    doc.source_url = j.at("sourceUrl").get<std::string>();
    doc.fetched_at = j.at("fetchedAt").get<std::string>();
    doc.content_hash = j.at("contentHash").get<std::string>();
    doc.readable_text = j.at("readableText").get<std::string>();
    doc.raw_html = j.value("rawHtml", std::string{});
    if (sha256_hex(doc.readable_text) != doc.content_hash)
        throw ContractViolation("policy document content hash mismatch for " + doc.site);
    return doc;
}

PolicyCache::PolicyCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock)
    : dir_(std::move(dir)), ttl_(ttl), clock_(std::move(clock)) {
    if (ttl_.count() <= 0) throw ContractViolation("cache ttl must be positive");
    std::filesystem::create_directories(dir_);
}

std::filesystem::path PolicyCache::file_for(const std::string& site) const { return dir_ / (slugify(site) + ".json"); }

std::optional<PolicyDocument> PolicyCache::get(const std::string& site) const {
    auto fresh = [&](const PolicyDocument& doc) {
        auto at = parse_utc(doc.fetched_at);
        return at && clock_() - *at < ttl_;
    };
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(site); it != memory_.end()) {
            if (fresh(it->second)) return it->second;
            return std::nullopt;
        }
    }
    std::unique_lock lock(mutex_);
    std::ifstream in(file_for(site));
    if (!in) return std::nullopt;
    try {
        auto doc = policy_document_from_json(nlohmann::json::parse(in));
        memory_[site] = doc;
        if (!fresh(doc)) return std::nullopt;
        return doc;
    } catch (const std::exception&) {
        return std::nullopt; // unreadable entries are treated as misses and overwritten on the next put
    }
}

void PolicyCache::put(const PolicyDocument& doc) {
    std::unique_lock lock(mutex_);
    memory_[doc.site] = doc;
    auto path = file_for(doc.site);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << to_json(doc).dump(2);
    }
    std::filesystem::rename(tmp, path);
}

void PolicyCache::erase(const std::string& site) {
    std::unique_lock lock(mutex_);
    memory_.erase(site);
    std::error_code ec;
    std::filesystem::remove(file_for(site), ec);
}

DiscoveryFailed::DiscoveryFailed(std::string site_url, std::vector<ScoredCandidate> ranked, const std::string& reason)
    : Error("discovery_failed", "could not locate a privacy policy for " + site_url + ": " + reason),
      ranked_(std::move(ranked)) {}

PolicyDocument discover_policy(const std::string& site_url, const DiscoveryOptions& options) {
    auto parsed = parse_url(site_url);
    if (!parsed || !parsed->is_http()) throw FetchError(FetchErrorKind::bad_url, site_url, "not an http(s) url: " + site_url);
    auto site = registrable_domain(parsed->host);

    if (options.cache)
        if (auto cached = options.cache->get(site)) return *cached;

    HttpFetcher live;
    const PageFetcher& fetcher = options.fetcher ? *options.fetcher : static_cast<const PageFetcher&>(live);

    auto home = fetch_page(site_url, options.limits, fetcher);
    auto candidates = harvest_links(home.html, home.final_url);
    auto selection = select_policy_link(candidates, options.llm, options.selection);
    if (!selection.selected_url)
        throw DiscoveryFailed(site_url, rank_candidates(candidates, options.selection.weights), selection.reason);

    auto policy = fetch_page(*selection.selected_url, options.limits, fetcher);
    auto doc = make_policy_document(site, policy.final_url, std::move(policy.html), options.clock());
    if (options.cache) options.cache->put(doc);
    return doc;
}

} // namespace rightpath::discovery
