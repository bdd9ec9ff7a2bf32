// SPDX-License-Identifier: Apache-2.0
#include "rightpath/guidance.hpp"

#include "rightpath/text.hpp"
#include "rightpath/url.hpp"

#include <algorithm>

namespace rightpath::guidance {

const char* const navigation_system_prompt =
    R"(You are Privy, an expert privacy assistant helping users with CCPA rights.

1. Goal: Help users complete privacy actions based on the provided page accessibility tree.

2. Context: You will receive a JSON accessibility tree. Each node may have: role, name, privyId (for interactive elements), children, and state properties (disabled, expanded, checked).

3. Response style: One-sentence summary followed by numbered quick steps. Refer to UI elements by their accessible name.

4. Response structure: Every response must contain three blocks:

[REASONING] Private chain-of-thought (not shown to user). [/REASONING]

[RESPONSE] User-facing instructions. [/RESPONSE]

[MACHINE_OUTPUT]
  {"highlights": [{"label": "...", "id": "<privyId>"}]}
[/MACHINE_OUTPUT])";

std::string to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::completed: return "completed";
    case SessionStatus::stuck: return "stuck";
    case SessionStatus::abandoned: return "abandoned";
    }
    return "active";
}

SessionStatus session_status_from_string(const std::string& s) {
    if (s == "active") return SessionStatus::active;
    if (s == "completed") return SessionStatus::completed;
    if (s == "stuck") return SessionStatus::stuck;
    if (s == "abandoned") return SessionStatus::abandoned;
    throw ContractViolation("unknown session status '" + s + "'");
}

namespace {

Strategy strategy_from_string(const std::string& s) {
    if (s == "link") return Strategy::link;
    if (s == "email") return Strategy::email;
    if (s == "navigation") return Strategy::navigation;
    throw ContractViolation("unknown strategy '" + s + "'");
}

nlohmann::json highlights_json(const std::vector<Highlight>& highlights) {
    auto out = nlohmann::json::array();
    for (const auto& h : highlights) out.push_back({{"label", h.label}, {"privyId", h.privy_id}});
    return out;
}

std::vector<Highlight> highlights_from_json(const nlohmann::json& j) {
    std::vector<Highlight> out;
    for (const auto& h : j) out.push_back({h.at("label").get<std::string>(), h.at("privyId").get<std::string>()});
    return out;
}

bool same_suggestion(const TurnRecord& a, const TurnRecord& b) {
    if (a.highlight_ids == b.highlight_ids) return true;
    return !a.highlight_targets.empty() && a.highlight_targets == b.highlight_targets;
}

bool is_navigation_record(const TurnRecord& r) { return !r.fingerprint.empty(); }

GuidanceTurn recovery_turn(const GuidanceSession& session) {
    GuidanceTurn turn;
    turn.reasoning = "loop detected; offering fallback";
    turn.response_text = "We keep landing on the same screens, so I'll stop suggesting clicks here.\n\n";
    if (session.fallback.email) {
        turn.response_text += "1. Email " + *session.fallback.email + " and ask them to handle this request: " +
                              session.right.label + ".\n";
        if (!session.fallback.policy_url.empty())
            turn.response_text += "2. Or read the privacy policy directly: " + session.fallback.policy_url + "\n";
    } else if (!session.fallback.policy_url.empty()) {
        turn.response_text += "1. Open the privacy policy: " + session.fallback.policy_url + "\n"
                              "2. Find the section about this request (" + session.right.label +
                              ") and use the contact method it lists.\n";
    } else {
        turn.response_text += "1. Contact the site's privacy team through its help pages and ask them to handle "
                              "this request: " + session.right.label + ".\n";
    }
    return turn;
}

} // namespace

GuidanceSession start_session(std::string id, std::string site, rights::Right right, SessionFallback fallback) {
    GuidanceSession session;
    session.id = std::move(id);
    session.site = std::move(site);
    session.strategy = select_strategy(right);
    session.right = std::move(right);
    session.fallback = std::move(fallback);
    return session;
}

bool close_session(GuidanceSession& session, SessionStatus status) {
    if (status == SessionStatus::active) throw ContractViolation("cannot close a session into the active status");
    if (session.status != SessionStatus::active) return false;
    session.status = status;
    return true;
}

nlohmann::json to_json(const TurnRecord& record) {
    return {{"fingerprint", record.fingerprint},
            {"url", record.url},
            {"reasoning", record.turn.reasoning},
            {"response_text", record.turn.response_text},
            {"highlights", highlights_json(record.turn.highlights)},
            {"highlightIds", record.highlight_ids},
            {"highlightTargets", record.highlight_targets}};
}

TurnRecord turn_record_from_json(const nlohmann::json& j) {
    TurnRecord r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.url = j.at("url").get<std::string>();
    r.turn.reasoning = j.at("reasoning").get<std::string>();
    r.turn.response_text = j.at("response_text").get<std::string>();
    r.turn.highlights = highlights_from_json(j.at("highlights"));
    r.highlight_ids = j.at("highlightIds").get<std::vector<std::string>>();
    r.highlight_targets = j.at("highlightTargets").get<std::vector<std::string>>();
    return r;
}

nlohmann::json to_storage_json(const GuidanceSession& session) {
    auto turns = nlohmann::json::array();
    for (const auto& t : session.turns) turns.push_back(to_json(t));
    nlohmann::json j = {{"id", session.id},
                        {"site", session.site},
                        {"right", rights::to_json(session.right)},
                        {"strategy", to_string(session.strategy)},
                        {"turns", turns},
                        {"status", to_string(session.status)},
                        {"stepCount", session.step_count},
                        {"fallback", {{"policyUrl", session.fallback.policy_url}}},
                        {"updatedAt", session.updated_at}};
    if (session.fallback.email) j["fallback"]["email"] = *session.fallback.email;
    if (session.email_draft) j["emailDraft"] = to_json(*session.email_draft);
    return j;
}

GuidanceSession session_from_storage_json(const nlohmann::json& j) {
    GuidanceSession s;
    s.id = j.at("id").get<std::string>();
    s.site = j.at("site").get<std::string>();
    // Round-trip the right through the strict parser so stored sessions obey
    // the same field rules as fresh extractions.
    auto rights = rights::parse_rights_response(nlohmann::json{{"rights", {j.at("right")}}}.dump());
    s.right = rights.at(0);
    s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    for (const auto& t : j.at("turns")) s.turns.push_back(turn_record_from_json(t));
    s.status = session_status_from_string(j.at("status").get<std::string>());
    s.step_count = j.at("stepCount").get<int>();
    const auto& fb = j.at("fallback");
    s.fallback.policy_url = fb.value("policyUrl", std::string{});
    if (fb.contains("email")) s.fallback.email = fb.at("email").get<std::string>();
    if (j.contains("emailDraft")) {
        const auto& d = j.at("emailDraft");
        s.email_draft = EmailDraft{d.at("to").get<std::string>(), d.at("subject").get<std::string>(),
                                   d.at("body").get<std::string>()};
    }
    s.updated_at = j.value("updatedAt", std::string{});
    if (s.step_count != static_cast<int>(s.turns.size()))
        throw ContractViolation("stored session " + s.id + " has step count out of sync with its turns");
    return s;
}

llm::ChatRequest build_navigation_prompt(const GuidanceSession& session, const AccessibilitySnapshot& snapshot,
                                         const GuidanceOptions& options) {
    if (session.strategy != Strategy::navigation) throw ContractViolation("session does not use navigation guidance");
    if (session.status != SessionStatus::active) throw ContractViolation("session is not active");

    std::string user = "Privacy action: " + session.right.label + "\n";
    if (!trim(session.right.prompt).empty()) user += "User request: " + trim(session.right.prompt) + "\n";
    user += "Policy excerpt: \"" + trim(session.right.excerpt) + "\"\n";
    if (!trim(session.right.action_value).empty())
        user += "Where the policy says to go: " + trim(session.right.action_value) + "\n";

    std::vector<const TurnRecord*> history;
    for (auto it = session.turns.rbegin(); it != session.turns.rend() && history.size() < options.history_turns; ++it)
        history.push_back(&*it);
    if (!history.empty()) {
        user += "\nPrevious steps (oldest first):\n";
        int n = 1;
        for (auto it = history.rbegin(); it != history.rend(); ++it)
            user += std::to_string(n++) + ". " + collapse_whitespace((*it)->turn.response_text) + "\n";
    }
    user += "\nCurrent URL: " + strip_fragment(snapshot.url()) + "\n\nAccessibility tree:\n" +
            serialize_snapshot(snapshot, options.node_budget) + "\n";

    llm::ChatRequest request;
    request.messages = {{llm::Role::system, navigation_system_prompt}, {llm::Role::user, std::move(user)}};
    request.expects_json = false;
    request.temperature = options.temperature;
    request.max_output = options.max_output;
    return request;
}

TurnRecord observe_turn(const GuidanceTurn& turn, const AccessibilitySnapshot& snapshot,
                        const std::vector<ResolvedHighlight>& resolved) {
    TurnRecord record;
    record.fingerprint = snapshot.fingerprint();
    record.url = strip_fragment(snapshot.url());
    record.turn = turn;
    for (const auto& h : turn.highlights) record.highlight_ids.push_back(h.privy_id);
    for (const auto& r : resolved)
        record.highlight_targets.push_back(r.node->role + "|" + collapse_whitespace(r.node->name));
    std::sort(record.highlight_ids.begin(), record.highlight_ids.end());
    std::sort(record.highlight_targets.begin(), record.highlight_targets.end());
    return record;
}

LoopVerdict detect_loop(const GuidanceSession& session, const TurnRecord& incoming, size_t window) {
    std::vector<const TurnRecord*> recent;
    for (auto it = session.turns.rbegin(); it != session.turns.rend() && recent.size() < window; ++it)
        if (is_navigation_record(*it)) recent.push_back(&*it);

    for (const auto* r : recent)
        if (r->fingerprint == incoming.fingerprint && same_suggestion(*r, incoming)) return LoopVerdict::cycle;

    // Returning to an earlier URL after leaving it, with that visit's
    // suggestion repeated. Catches redirects that change page content enough
    // to alter the fingerprint.
    for (size_t i = 1; i < recent.size(); ++i) {
        if (recent[i]->url != incoming.url || !same_suggestion(*recent[i], incoming)) continue;
        bool left = std::any_of(recent.begin(), recent.begin() + static_cast<long>(i),
                                [&](const TurnRecord* r) { return r->url != incoming.url; });
        if (left) return LoopVerdict::cycle;
    }
    return LoopVerdict::none;
}

AdvanceResult advance_session(GuidanceSession& session, const AccessibilitySnapshot* snapshot, llm::Provider* llm,
                              const GuidanceOptions& options, const UserHints& hints) {
    if (session.status != SessionStatus::active) throw ContractViolation("session is not active");

    AdvanceResult result;
    TurnRecord record;
    switch (session.strategy) {
    case Strategy::link:
        result.turn = render_link_guidance(session.right, session.fallback.policy_url);
        break;
    case Strategy::email: {
        auto draft = compose_email_template(session.right, session.site, hints);
        result.turn = render_email_guidance(session.right, draft);
        session.email_draft = std::move(draft);
        break;
    }
    case Strategy::navigation: {
        if (!snapshot) throw ContractViolation("navigation guidance needs a page snapshot");
        if (!llm) throw ContractViolation("navigation guidance needs a completion backend");
        auto request = build_navigation_prompt(session, *snapshot, options);
        std::optional<std::string> failure_code;
        std::string failure;
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string raw;
            try {
                raw = llm::complete(request, *llm).text;
            } catch (const llm::LlmError& e) {
                throw TurnFailed("backend_unavailable", e.what());
            }
            try {
                result.turn = parse_guidance_response(raw);
                result.resolved = resolve_highlights(result.turn, *snapshot);
                failure_code.reset();
                break;
            } catch (const GuidanceParseError& e) {
                failure_code = "turn_failed";
                failure = e.what();
            } catch (const UnknownPrivyId& e) {
                failure_code = "stale_snapshot";
                failure = e.what();
            }
            request.messages.push_back({llm::Role::assistant, raw});
            request.messages.push_back(
                {llm::Role::user, "Your previous reply could not be used: " + failure +
                                      ". Reply again with exactly the three blocks, using only privyId values "
                                      "present in the accessibility tree."});
        }
        if (failure_code) throw TurnFailed(*failure_code, failure);

        record = observe_turn(result.turn, *snapshot, result.resolved);
        result.loop = detect_loop(session, record, options.loop_window);
        if (result.loop == LoopVerdict::cycle) {
            result.turn = recovery_turn(session);
            result.resolved.clear();
            record.turn = result.turn;
            session.status = SessionStatus::stuck;
        }
        break;
    }
    }

    if (session.strategy != Strategy::navigation) {
        record.turn = result.turn;
        session.status = SessionStatus::completed;
    }
    session.turns.push_back(std::move(record));
    session.step_count = static_cast<int>(session.turns.size());
    return result;
}

nlohmann::json to_wire(const GuidanceTurn& turn, SessionStatus status) {
    return {{"response_text", turn.response_text},
            {"highlights", highlights_json(turn.highlights)},
            {"status", to_string(status)}};
}

nlohmann::json to_wire(const GuidanceSession& session) {
    auto turns = nlohmann::json::array();
    for (const auto& t : session.turns)
        turns.push_back({{"response_text", t.turn.response_text},
                         {"highlights", highlights_json(t.turn.highlights)},
                         {"url", t.url}});
    nlohmann::json j = {{"id", session.id},
                        {"site", session.site},
                        {"rightId", session.right.id},
                        {"label", session.right.label},
                        {"strategy", to_string(session.strategy)},
                        {"status", to_string(session.status)},
                        {"stepCount", session.step_count},
                        {"turns", turns},
                        {"fallback", {{"policyUrl", session.fallback.policy_url}}}};
    if (session.fallback.email) j["fallback"]["email"] = *session.fallback.email;
    if (session.email_draft) j["emailDraft"] = to_json(*session.email_draft);
    return j;
}

} // namespace rightpath::guidance
