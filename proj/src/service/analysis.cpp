// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include "rightpath/text.hpp"
#include "rightpath/url.hpp"

#include <fstream>

namespace rightpath::service {

AnalysisCache::AnalysisCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock)
    : dir_(std::move(dir)), ttl_(ttl), clock_(std::move(clock)) {
    if (ttl_.count() <= 0) throw ContractViolation("analysis cache ttl must be positive");
    std::filesystem::create_directories(dir_);
}

std::filesystem::path AnalysisCache::file_for(const std::string& site) const {
    return dir_ / (slugify(site) + ".json");
}

bool AnalysisCache::fresh(const AnalysisCacheEntry& e) const {
    auto at = parse_utc(e.stored_at);
    return at && clock_() - *at < ttl_;
}

std::optional<AnalysisCacheEntry> AnalysisCache::load(const std::string& site) const {
    if (auto it = memory_.find(site); it != memory_.end()) return it->second;
    std::ifstream in(file_for(site));
    if (!in) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(in);
        AnalysisCacheEntry e;
        e.analysis = rights::analysis_from_json(j.at("analysis"));
        e.site = e.analysis.site;
        e.policy_hash = e.analysis.policy_hash;
        e.stored_at = j.at("storedAt").get<std::string>();
        if (e.site != site) return std::nullopt;
        memory_[site] = e;
        return e;
    } catch (const std::exception&) {
        return std::nullopt; // unreadable entries are misses; the next put overwrites them
    }
}

std::optional<rights::RightsAnalysis> AnalysisCache::get(const std::string& site, const std::string& policy_hash) const {
    std::lock_guard lock(mutex_);
    auto e = load(site);
    if (!e || e->policy_hash != policy_hash || !fresh(*e)) return std::nullopt;
    return e->analysis;
}

std::optional<AnalysisCacheEntry> AnalysisCache::latest(const std::string& site) const {
    std::lock_guard lock(mutex_);
    auto e = load(site);
    if (!e || !fresh(*e)) return std::nullopt;
    return e;
}

void AnalysisCache::put(const rights::RightsAnalysis& analysis) {
    std::lock_guard lock(mutex_);
    AnalysisCacheEntry e{analysis.site, analysis.policy_hash, analysis, format_utc(clock_())};
    memory_[analysis.site] = e;
    auto path = file_for(analysis.site);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << nlohmann::json{{"storedAt", e.stored_at}, {"analysis", rights::to_json(analysis)}}.dump(2);
    }
    std::filesystem::rename(tmp, path);
}

AnalysisService::AnalysisService(std::shared_ptr<llm::Provider> llm,
                                 std::shared_ptr<const discovery::PageFetcher> fetcher,
                                 std::shared_ptr<discovery::PolicyCache> policy_cache,
                                 std::shared_ptr<AnalysisCache> cache, AnalysisOptions options)
    : llm_(std::move(llm)), fetcher_(std::move(fetcher)), policy_cache_(std::move(policy_cache)),
      cache_(std::move(cache)), options_(std::move(options)) {
    if (!llm_) throw ContractViolation("analysis service needs a completion backend");
    if (!cache_) throw ContractViolation("analysis service needs an analysis cache");
}

AnalysisResult AnalysisService::analyze(const std::string& url) {
    discovery::DiscoveryOptions d;
    d.fetcher = fetcher_.get();
    d.llm = options_.llm_link_selection ? llm_.get() : nullptr;
    d.cache = policy_cache_.get();
    d.limits = options_.limits;
    d.selection = options_.selection;
    d.clock = options_.clock;
    auto doc = discovery::discover_policy(url, d);

    AnalysisResult result;
    if (auto hit = cache_->get(doc.site, doc.content_hash)) {
        result.analysis = std::move(*hit);
        result.document = std::move(doc);
        result.cache_hit = true;
        return result;
    }

    auto key = std::make_pair(doc.site, doc.content_hash);
    std::shared_future<rights::RightsAnalysis> flight;
    std::promise<rights::RightsAnalysis> promise;
    bool leader = false;
    {
        std::lock_guard lock(flights_mutex_);
        auto it = flights_.find(key);
        if (it != flights_.end()) {
            flight = it->second;
        } else {
            flight = promise.get_future().share();
            flights_.emplace(key, flight);
            leader = true;
        }
    }
    if (leader) {
        try {
            // A concurrent leader may have finished between the cache check
            // and taking the flight slot.
            auto cached = cache_->get(doc.site, doc.content_hash);
            if (cached) {
                promise.set_value(*cached);
            } else {
                ++extractions_;
                auto options = options_.extraction;
                options.clock = options_.clock;
                auto analysis = rights::extract_rights(doc, *llm_, options);
                cache_->put(analysis);
                promise.set_value(std::move(analysis));
            }
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
        std::lock_guard lock(flights_mutex_);
        flights_.erase(key);
    }
    result.analysis = flight.get();
    result.document = std::move(doc);
    return result;
}

std::optional<AnalysisResult> AnalysisService::find_site(const std::string& site) const {
    auto key = site;
    if (auto u = parse_url(site)) key = registrable_domain(u->host);
    else key = registrable_domain(to_lower(trim(site)));
    auto entry = cache_->latest(key);
    if (!entry) return std::nullopt;
    AnalysisResult r;
    r.analysis = entry->analysis;
    r.cache_hit = true;
    if (policy_cache_)
        if (auto doc = policy_cache_->get(key); doc && doc->content_hash == entry->policy_hash) r.document = *doc;
    return r;
}

nlohmann::json analysis_wire(const rights::RightsAnalysis& analysis, size_t label_cap) {
    auto j = rights::to_json(analysis);
    auto labels = nlohmann::json::array();
    for (size_t i = 0; i < analysis.rights.size() && i < label_cap; ++i) {
        const auto& r = analysis.rights[i];
        labels.push_back({{"id", r.id}, {"label", r.label}, {"mechanism", rights::to_string(r.mechanism)}});
    }
    j["labels"] = labels;
    return j;
}

} // namespace rightpath::service
