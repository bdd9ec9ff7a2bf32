// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include "rightpath/text.hpp"

#include <algorithm>

namespace rightpath::service {

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

namespace {

// Maps the library's typed errors onto HTTP statuses. Only codes and
// messages cross the wire.
ApiResponse from_exception(std::exception_ptr error) {
    try {
        std::rethrow_exception(error);
    } catch (const guidance::TurnFailed& e) {
        if (e.code() == "stale_snapshot") {
            auto r = error_response(409, e.code(), e.what());
            r.body["error"]["retry"] = "fresh_snapshot";
            return r;
        }
        return error_response(e.code() == "backend_unavailable" ? 502 : 422, e.code(), e.what());
    } catch (const guidance::SnapshotError& e) {
        return error_response(400, e.code(), e.what());
    } catch (const discovery::FetchError& e) {
        return error_response(e.code() == "fetch_bad_url" ? 400 : 502,
                              e.code() == "fetch_bad_url" ? e.code() : "discovery_failed", e.what());
    } catch (const discovery::DiscoveryFailed& e) {
        return error_response(502, e.code(), e.what());
    } catch (const rights::ExtractionFailed& e) {
        return error_response(502, e.code(), e.what());
    } catch (const context::ContextUnavailable& e) {
        return error_response(503, e.code(), e.what());
    } catch (const llm::LlmError& e) {
        return error_response(502, e.code(), e.what());
    } catch (const ContractViolation& e) {
        return error_response(409, e.code(), e.what());
    } catch (const Error& e) {
        return error_response(500, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

template <typename F>
ApiResponse guarded(F&& f) {
    try {
        return f();
    } catch (...) {
        return from_exception(std::current_exception());
    }
}

std::optional<std::string> string_field(const nlohmann::json& j, std::initializer_list<const char*> keys) {
    if (!j.is_object()) return std::nullopt;
    for (const char* k : keys)
        if (auto it = j.find(k); it != j.end() && it->is_string() && !trim(it->get<std::string>()).empty())
            return trim(it->get<std::string>());
    return std::nullopt;
}

guidance::UserHints hints_from_json(const nlohmann::json& j) {
    guidance::UserHints h;
    if (!j.is_object()) return h;
    h.full_name = string_field(j, {"fullName", "full_name"});
    h.account_email = string_field(j, {"accountEmail", "account_email"});
    h.account_id = string_field(j, {"accountId", "account_id"});
    h.state_of_residence = string_field(j, {"stateOfResidence", "state_of_residence"});
    return h;
}

ApiResponse not_found_session(const std::string& id) {
    return error_response(404, "unknown_session", "no session with id '" + id + "'");
}

nlohmann::json turn_payload(const guidance::GuidanceSession& session, const guidance::AdvanceResult& result) {
    nlohmann::json j = {{"sessionId", session.id},
                        {"turnIndex", session.step_count},
                        {"turn", guidance::to_wire(result.turn, session.status)},
                        {"loopDetected", result.loop == guidance::LoopVerdict::cycle}};
    if (session.email_draft && session.strategy == guidance::Strategy::email)
        j["emailDraft"] = guidance::to_json(*session.email_draft);
    return j;
}

} // namespace

Api::Api(std::shared_ptr<AnalysisService> analyses, std::shared_ptr<SessionStore> sessions,
         std::shared_ptr<llm::Provider> llm, guidance::GuidanceOptions guidance_options)
    : analyses_(std::move(analyses)), sessions_(std::move(sessions)), llm_(std::move(llm)),
      guidance_options_(guidance_options) {}

ApiResponse Api::analyze(const nlohmann::json& request) {
    return guarded([&]() -> ApiResponse {
        auto url = string_field(request, {"url"});
        if (!url) return error_response(400, "bad_request", "body must be {\"url\": \"https://...\"}");
        auto result = analyses_->analyze(*url);
        return {200, analysis_wire(result.analysis)};
    });
}

ApiResponse Api::create_session(const nlohmann::json& request) {
    return guarded([&]() -> ApiResponse {
        auto site = string_field(request, {"site"});
        auto right_id = string_field(request, {"rightId", "right_id"});
        if (!site || !right_id) return error_response(400, "bad_request", "body must carry site and rightId");
        auto found = analyses_->find_site(*site);
        if (!found) return error_response(404, "unknown_site", "no analysis cached for " + *site);
        const auto& analysis = found->analysis;
        auto right = std::find_if(analysis.rights.begin(), analysis.rights.end(),
                                  [&](const rights::Right& r) { return r.id == *right_id; });
        if (right == analysis.rights.end())
            return error_response(404, "unknown_right", "no right '" + *right_id + "' for " + analysis.site);

        guidance::SessionFallback fallback{analysis.policy_url, std::nullopt};
        for (const auto& r : analysis.rights)
            if (r.mechanism == rights::Mechanism::email) {
                auto v = trim(r.action_value);
                fallback.email = v.starts_with("mailto:") ? v.substr(7) : v;
                break;
            }
        auto session = guidance::start_session(sessions_->next_id(), analysis.site, *right, fallback);
        auto id = session.id;
        sessions_->insert(std::move(session));

        bool has_snapshot = request.contains("snapshot") && !request.at("snapshot").is_null();
        auto hints = hints_from_json(request.value("hints", nlohmann::json::object()));
        nlohmann::json body;
        sessions_->with_session(id, [&](guidance::GuidanceSession& s) {
            if (s.strategy != guidance::Strategy::navigation || has_snapshot) {
                std::optional<guidance::AccessibilitySnapshot> snap;
                if (has_snapshot) snap = guidance::snapshot_from_json(request.at("snapshot"));
                auto result = guidance::advance_session(s, snap ? &*snap : nullptr, llm_.get(), guidance_options_, hints);
                body = turn_payload(s, result);
            } else {
                body = {{"sessionId", s.id}, {"turnIndex", 0}, {"turn", nullptr}};
            }
            body["strategy"] = guidance::to_string(s.strategy);
            body["status"] = guidance::to_string(s.status);
        });
        return {201, body};
    });
}

ApiResponse Api::turn(const std::string& session_id, const nlohmann::json& request) {
    return guarded([&]() -> ApiResponse {
        if (!request.is_object() || !request.contains("snapshot"))
            return error_response(400, "bad_request", "body must carry a snapshot");
        auto snapshot = guidance::snapshot_from_json(request.at("snapshot"));
        nlohmann::json body;
        bool found = sessions_->with_session(session_id, [&](guidance::GuidanceSession& s) {
            auto result = guidance::advance_session(s, &snapshot, llm_.get(), guidance_options_);
            body = turn_payload(s, result);
        });
        if (!found) return not_found_session(session_id);
        return {200, body};
    });
}

ApiResponse Api::context(const std::string& session_id) {
    return guarded([&]() -> ApiResponse {
        auto session = sessions_->get(session_id);
        if (!session) return not_found_session(session_id);
        auto found = analyses_->find_site(session->site);
        if (!found || found->document.readable_text.empty())
            return error_response(503, "context_unavailable", "policy text for " + session->site + " is no longer cached");
        const auto& doc = found->document;
        if (auto cached = contexts_.get(session->right.id, doc.content_hash)) return {200, context::to_wire(*cached)};
        auto ctx = context::generate_policy_context(session->right, doc, *llm_);
        contexts_.put(doc.content_hash, ctx);
        return {200, context::to_wire(ctx)};
    });
}

ApiResponse Api::complete(const std::string& session_id) {
    return guarded([&]() -> ApiResponse {
        nlohmann::json body;
        bool found = sessions_->with_session(session_id, [&](guidance::GuidanceSession& s) {
            guidance::close_session(s, guidance::SessionStatus::completed);
            body = guidance::to_wire(s);
        });
        if (!found) return not_found_session(session_id);
        return {200, body};
    });
}

ApiResponse Api::get_session(const std::string& session_id) {
    return guarded([&]() -> ApiResponse {
        auto session = sessions_->get(session_id);
        if (!session) return not_found_session(session_id);
        return {200, guidance::to_wire(*session)};
    });
}

} // namespace rightpath::service
