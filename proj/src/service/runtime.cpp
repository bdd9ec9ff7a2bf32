// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

namespace rightpath::service {

Runtime make_runtime(const ServiceConfig& config, Clock clock, std::shared_ptr<llm::Provider> llm) {
    Runtime rt;
    rt.llm = llm ? std::move(llm) : make_service_provider(config);

    std::shared_ptr<const discovery::PageFetcher> fetcher;
    if (!config.fixture_root.empty())
        fetcher = std::make_shared<discovery::DirectoryFetcher>(config.fixture_root);
    else
        fetcher = std::make_shared<discovery::HttpFetcher>();

    auto policies = std::make_shared<discovery::PolicyCache>(config.cache_dir / "policies", config.cache_ttl, clock);
    auto analyses = std::make_shared<AnalysisCache>(config.cache_dir / "analyses", config.cache_ttl, clock);

    AnalysisOptions options;
    options.llm_link_selection = config.llm_link_selection;
    options.extraction.max_attempts = config.extraction_attempts;
    options.clock = clock;
    rt.analyses = std::make_shared<AnalysisService>(rt.llm, fetcher, policies, analyses, options);
    rt.sessions = std::make_shared<SessionStore>(config.cache_dir / "sessions", config.session_ttl, clock);

    guidance::GuidanceOptions g;
    g.node_budget = config.node_budget;
    rt.api = std::make_shared<Api>(rt.analyses, rt.sessions, rt.llm, g);
    return rt;
}

} // namespace rightpath::service
