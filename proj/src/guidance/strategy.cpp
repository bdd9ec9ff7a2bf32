// SPDX-License-Identifier: Apache-2.0
#include "rightpath/guidance.hpp"

#include "rightpath/text.hpp"
#include "rightpath/url.hpp"

#include <regex>

namespace rightpath::guidance {

using rights::Mechanism;

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::link: return "link";
    case Strategy::email: return "email";
    case Strategy::navigation: return "navigation";
    }
    return "navigation";
}

Strategy select_strategy(const rights::Right& right) {
    switch (right.mechanism) {
    case Mechanism::email: return Strategy::email;
    case Mechanism::link: return Strategy::link;
    case Mechanism::navigation: return Strategy::navigation;
    case Mechanism::form: {
        auto url = parse_url(trim(right.action_value));
        return url && url->is_http() ? Strategy::link : Strategy::navigation;
    }
    }
    return Strategy::navigation;
}

GuidanceTurn render_link_guidance(const rights::Right& right, const std::string& site_url) {
    auto value = trim(right.action_value);
    auto url = parse_url(value);
    if (!url && value.starts_with("/") && !site_url.empty())
        if (auto base = parse_url(site_url)) url = resolve_url(*base, value);
    if (!url || !url->is_http() || url->host.empty())
        throw ContractViolation("link guidance needs an http(s) URL, got \"" + right.action_value + "\"");

    GuidanceTurn turn;
    turn.response_text = right.label + ": " + url->str() +
                         "\n\nWhat to expect: the link goes straight to " + url->host +
                         "'s own page for this request, where you may need to sign in before submitting it.";
    return turn;
}

nlohmann::json to_json(const EmailDraft& draft) {
    return {{"to", draft.to}, {"subject", draft.subject}, {"body", draft.body}};
}

EmailDraft compose_email_template(const rights::Right& right, const std::string& site, const UserHints& hints) {
    auto value = trim(right.action_value);
    std::string_view to = value;
    if (to.starts_with("mailto:")) to.remove_prefix(7);
    if (!is_email_address(to))
        throw ContractViolation("email guidance needs an email address, got \"" + right.action_value + "\"");

    auto or_slot = [](const std::optional<std::string>& value, const char* slot) {
        return value && !trim(*value).empty() ? trim(*value) : std::string(slot);
    };
    auto name = or_slot(hints.full_name, "[YOUR NAME]");

    EmailDraft draft;
    draft.to = std::string(to);
    draft.subject = "California Consumer Privacy Act request: " + right.label;
    draft.body = "To the " + site + " privacy team,\n\n"
                 "I am a California resident writing to exercise my rights under the California Consumer Privacy "
                 "Act (CCPA), as amended by the CPRA. Specifically, I request the following: " +
                 right.label + ".\n\n";
    if (!trim(right.excerpt).empty()) draft.body += "Your privacy policy states: \"" + trim(right.excerpt) + "\"\n\n";
    draft.body += "Please use these details to locate my records:\n"
                  "Name: " + name + "\n"
                  "Account email: " + or_slot(hints.account_email, "[YOUR ACCOUNT EMAIL]") + "\n"
                  "Account ID or username: " + or_slot(hints.account_id, "[YOUR ACCOUNT ID]") + "\n"
                  "State of residence: " + or_slot(hints.state_of_residence, "[YOUR STATE OF RESIDENCE]") + "\n\n"
                  "Please confirm receipt of this request and respond within the 45 days allowed by law. If you "
                  "need more information to verify my identity, let me know what is required.\n\n"
                  "Sincerely,\n" + name + "\n";
    return draft;
}

EmailDraft polish_email(const EmailDraft& draft, const rights::Right& right, const std::string& site,
                        llm::Provider& llm) {
    static const std::regex slot(R"(\[YOUR [A-Z ]+\])");
    llm::ChatRequest request;
    request.expects_json = true;
    request.temperature = 0.3;
    request.max_output = 2048;
    request.messages = {
        {llm::Role::system,
         "You edit formal privacy request emails. Improve clarity and tone without changing facts. Keep every "
         "bracketed placeholder exactly as written. Respond only with JSON: {\"body\": \"...\"}"},
        {llm::Role::user, "Subject: " + draft.subject + "\n\n" + draft.body},
    };
    try {
        auto reply = nlohmann::json::parse(llm::complete(request, llm).text);
        auto body = reply.at("body").get<std::string>();
        if (!contains_icase(body, site) || !contains_icase(body, right.label)) return draft;
        for (std::sregex_iterator it(draft.body.begin(), draft.body.end(), slot), end; it != end; ++it)
            if (body.find(it->str()) == std::string::npos) return draft;
        EmailDraft polished = draft;
        polished.body = std::move(body);
        return polished;
    } catch (const std::exception&) {
        return draft;
    }
}

GuidanceTurn render_email_guidance(const rights::Right& right, const EmailDraft& draft) {
    GuidanceTurn turn;
    turn.response_text = "Send an email to " + draft.to + " with this request: " + right.label +
                         "\n\n1. Copy the draft below into your mail app.\n"
                         "2. Replace each bracketed placeholder with your own details.\n"
                         "3. Send it and keep a copy until the company replies.\n\n"
                         "To: " + draft.to + "\nSubject: " + draft.subject + "\n\n" + draft.body;
    return turn;
}

} // namespace rightpath::guidance
