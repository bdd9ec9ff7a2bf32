// SPDX-License-Identifier: Apache-2.0
#include "rightpath/discovery.hpp"

#include "rightpath/html.hpp"
#include "rightpath/url.hpp"

#include <algorithm>
#include <set>

namespace rightpath::discovery {

std::string to_string(Region region) {
    switch (region) {
    case Region::footer: return "footer";
    case Region::nav: return "nav";
    case Region::header: return "header";
    case Region::body: return "body";
    }
    return "body";
}

std::string to_string(Confidence c) {
    switch (c) {
    case Confidence::high: return "high";
    case Confidence::medium: return "medium";
    case Confidence::low: return "low";
    }
    return "low";
}

std::string to_string(SelectionMethod m) { return m == SelectionMethod::llm ? "llm" : "heuristic"; }

namespace {

std::optional<Region> landmark_of(const html::Token& tag) {
    if (tag.name == "footer") return Region::footer;
    if (tag.name == "nav") return Region::nav;
    if (tag.name == "header") return Region::header;
    if (auto role = tag.attribute("role")) {
        auto r = to_lower(trim(*role));
        if (r == "contentinfo") return Region::footer;
        if (r == "navigation") return Region::nav;
        if (r == "banner") return Region::header;
    }
    return std::nullopt;
}

std::string bare_host(std::string host) {
    if (host.starts_with("www.")) host.erase(0, 4);
    return host;
}

struct OpenElement {
    std::string name;
    std::optional<Region> landmark;
};

} // namespace

std::vector<CandidateLink> harvest_links(std::string_view html, const std::string& base_url) {
    std::vector<CandidateLink> out;
    auto base = parse_url(base_url);
    if (!base) return out;

    std::vector<OpenElement> stack;
    std::set<std::pair<std::string, std::string>> seen;
    size_t order = 0;

    struct Pending {
        Url url;
        Region region;
        std::string text;
        std::string fallback; // aria-label / title / img alt
    };
    std::optional<Pending> anchor;

    auto current_region = [&] {
        for (auto it = stack.rbegin(); it != stack.rend(); ++it)
            if (it->landmark) return *it->landmark;
        return Region::body;
    };

    auto finish_anchor = [&] {
        if (!anchor) return;
        auto text = collapse_whitespace(anchor->text);
        if (text.empty()) text = collapse_whitespace(anchor->fallback);
        CandidateLink link;
        link.url = anchor->url.without_fragment();
        link.anchor_text = text;
        link.region = anchor->region;
        link.same_origin = bare_host(anchor->url.host) == bare_host(base->host);
        link.path_privacy_hint = to_lower(anchor->url.path).find("/privacy") != std::string::npos;
        if (seen.emplace(link.url, link.anchor_text).second) {
            link.document_order = order++;
            out.push_back(std::move(link));
        }
        anchor.reset();
    };

    html::tokenize(html, [&](const html::Token& t) {
        using Kind = html::Token::Kind;
        if (t.kind == Kind::start_tag) {
            if (t.name == "a") {
                finish_anchor();
                auto href = t.attribute("href");
                if (href) {
                    auto h = trim(*href);
                    auto lowered = to_lower(h);
                    bool skip = h.empty() || h.front() == '#' || lowered.starts_with("mailto:") ||
                                lowered.starts_with("javascript:") || lowered.starts_with("tel:") ||
                                lowered.starts_with("data:");
                    if (!skip) {
                        if (auto resolved = resolve_url(*base, h); resolved && resolved->is_http()) {
                            anchor = Pending{*resolved, current_region(), {}, {}};
                            if (auto label = t.attribute("aria-label")) anchor->fallback = *label;
                            else if (auto title = t.attribute("title")) anchor->fallback = *title;
                        }
                    }
                }
            } else if (t.name == "img" && anchor && anchor->fallback.empty()) {
                if (auto alt = t.attribute("alt")) anchor->fallback = *alt;
            }
            if (!html::is_void_element(t.name) && !t.self_closing && t.name != "a")
                stack.push_back({t.name, landmark_of(t)});
        } else if (t.kind == Kind::end_tag) {
            if (t.name == "a") {
                finish_anchor();
                return;
            }
            auto it = std::find_if(stack.rbegin(), stack.rend(), [&](const OpenElement& e) { return e.name == t.name; });
            if (it != stack.rend()) stack.erase(std::prev(it.base()), stack.end());
        } else if (t.kind == Kind::text && anchor) {
            if (stack.empty() || (stack.back().name != "script" && stack.back().name != "style"))
                anchor->text += t.text;
        }
    });
    finish_anchor();
    return out;
}

int score_candidate(const CandidateLink& link, const std::string& page_domain, const RankWeights& w) {
    auto text = to_lower(link.anchor_text);
    auto parsed = parse_url(link.url);
    auto path = parsed ? to_lower(parsed->path + "?" + parsed->query) : to_lower(link.url);
    int score = 0;

    bool titled = text.find("privacy policy") != std::string::npos || text.find("privacy notice") != std::string::npos ||
                  text.find("privacy statement") != std::string::npos;
    if (titled)
        score += w.privacy_title;
    else if (text.find("privacy") != std::string::npos)
        score += w.privacy_word;
    if (link.region == Region::footer || link.region == Region::nav) score += w.footer_or_nav;
    if (link.path_privacy_hint) score += w.path_hint;
    if (link.same_origin) score += w.same_origin;

    if (text.find("cookie") != std::string::npos || path.find("cookie") != std::string::npos) score += w.cookie;
    if (text.find("terms") != std::string::npos || path.find("/terms") != std::string::npos ||
        path.find("/tos") != std::string::npos)
        score += w.terms;
    if (text.find("do not sell") != std::string::npos || path.find("do-not-sell") != std::string::npos ||
        path.find("donotsell") != std::string::npos)
        score += w.do_not_sell;
    if (parsed && !page_domain.empty() && registrable_domain(parsed->host) != page_domain) score += w.third_party;
    return score;
}

namespace {

// The page's own domain is the registrable domain shared by the same-origin links.
std::string infer_page_domain(const std::vector<CandidateLink>& candidates) {
    for (const auto& c : candidates)
        if (c.same_origin)
            if (auto u = parse_url(c.url)) return registrable_domain(u->host);
    return {};
}

bool has_privacy_evidence(const CandidateLink& link) {
    return link.path_privacy_hint || contains_icase(link.anchor_text, "privacy");
}

} // namespace

std::vector<ScoredCandidate> rank_candidates(const std::vector<CandidateLink>& candidates, const RankWeights& weights) {
    auto domain = infer_page_domain(candidates);
    std::vector<ScoredCandidate> ranked;
    ranked.reserve(candidates.size());
    for (const auto& c : candidates) ranked.push_back({c, score_candidate(c, domain, weights)});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.link.document_order < b.link.document_order;
                     });
    return ranked;
}

const char* const link_selector_prompt =
    R"(You are a privacy policy link selector. Given a list of links found on a webpage, select the SINGLE link most likely to be the site's main privacy policy page.

Prioritize: (1) links named "Privacy Policy" or "Privacy Notice"; (2) links in footer or navigation regions; (3) URLs containing /privacy; (4) same-origin links.

De-prioritize: cookie settings, terms of service, third-party framework links, "Do Not Sell" pages.

Respond with JSON:
{"selectedUrl": "..." | null,
  "confidence": "high" | "medium" | "low",
  "reason": "..."})";

llm::ChatRequest build_link_selection_request(const std::vector<ScoredCandidate>& ranked, size_t max_candidates) {
    auto links = nlohmann::json::array();
    for (size_t i = 0; i < ranked.size() && i < max_candidates; ++i) {
        const auto& c = ranked[i].link;
        links.push_back({{"url", c.url}, {"text", c.anchor_text}, {"region", to_string(c.region)}, {"sameOrigin", c.same_origin}});
    }
    llm::ChatRequest request;
    request.messages = {{llm::Role::system, link_selector_prompt},
                        {llm::Role::user, "Links found on the page:\n" + links.dump(2)}};
    request.expects_json = true;
    request.temperature = 0.0;
    request.max_output = 512;
    return request;
}

namespace {

PolicySelection heuristic_selection(const std::vector<ScoredCandidate>& ranked, const SelectionOptions& options,
                                    const std::string& note) {
    PolicySelection sel;
    sel.method = SelectionMethod::heuristic;
    auto best = std::find_if(ranked.begin(), ranked.end(),
                             [](const ScoredCandidate& c) { return has_privacy_evidence(c.link); });
    if (best == ranked.end()) {
        sel.confidence = Confidence::low;
        sel.reason = ranked.empty() ? "no candidate links" : "no candidate mentions privacy";
        if (!note.empty()) sel.reason += " (" + note + ")";
        return sel;
    }
    // Highest score among all other candidates.
    std::optional<int> runner_up;
    if (best != ranked.begin())
        runner_up = ranked.front().score;
    else if (ranked.size() > 1)
        runner_up = ranked[1].score;

    sel.selected_url = best->link.url;
    sel.confidence = !runner_up || best->score - *runner_up >= options.high_confidence_margin ? Confidence::high
                                                                                               : Confidence::medium;
    sel.reason = "rubric score " + std::to_string(best->score) + " for \"" + best->link.anchor_text + "\" (" +
                 to_string(best->link.region) + ")";
    if (!note.empty()) sel.reason += "; " + note;
    return sel;
}

} // namespace

PolicySelection select_policy_link(const std::vector<CandidateLink>& candidates, llm::Provider* llm,
                                   const SelectionOptions& options) {
    auto ranked = rank_candidates(candidates, options.weights);
    if (candidates.empty()) return heuristic_selection(ranked, options, {});
    if (llm == nullptr) return heuristic_selection(ranked, options, {});

    std::string note;
    try {
        auto reply = llm::complete(build_link_selection_request(ranked, options.max_llm_candidates), *llm);
        auto j = nlohmann::json::parse(strip_code_fence(reply.text));
        const auto& url = j.at("selectedUrl");
        auto confidence = j.at("confidence").get<std::string>();
        if (url.is_null()) {
            note = "selector returned null";
        } else {
            auto chosen = url.get<std::string>();
            bool known = std::any_of(ranked.begin(), ranked.end(), [&](const ScoredCandidate& c) {
                return c.link.url == chosen && &c - ranked.data() < static_cast<ptrdiff_t>(options.max_llm_candidates);
            });
            if (!known) {
                note = "selector chose a url outside the candidate set";
            } else {
                PolicySelection sel;
                sel.selected_url = chosen;
                sel.method = SelectionMethod::llm;
                sel.reason = j.value("reason", std::string{});
                sel.confidence = confidence == "high" ? Confidence::high
                                 : confidence == "low" ? Confidence::low
                                                       : Confidence::medium;
                return sel;
            }
        }
    } catch (const llm::LlmError& e) {
        note = std::string("selector unavailable: ") + e.what();
    } catch (const nlohmann::json::exception& e) {
        note = std::string("selector reply malformed: ") + e.what();
    }
    return heuristic_selection(ranked, options, note);
}

} // namespace rightpath::discovery
