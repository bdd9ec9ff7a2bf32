// SPDX-License-Identifier: Apache-2.0
#include "rightpath/rights.hpp"

#include "rightpath/url.hpp"

#include <algorithm>
#include <set>

namespace rightpath::rights {

std::string to_string(Mechanism m) {
    switch (m) {
    case Mechanism::email: return "email";
    case Mechanism::link: return "link";
    case Mechanism::navigation: return "navigation";
    case Mechanism::form: return "form";
    }
    return "navigation";
}

std::optional<Mechanism> mechanism_from_string(std::string_view s) {
    if (s == "email") return Mechanism::email;
    if (s == "link") return Mechanism::link;
    if (s == "navigation") return Mechanism::navigation;
    if (s == "form") return Mechanism::form;
    return std::nullopt;
}

std::string to_string(ParseErrorKind kind) {
    switch (kind) {
    case ParseErrorKind::not_json: return "not_json";
    case ParseErrorKind::shape_mismatch: return "shape_mismatch";
    case ParseErrorKind::illegal_mechanism: return "illegal_mechanism";
    case ParseErrorKind::missing_field: return "missing_field";
    }
    return "shape_mismatch";
}

std::string to_string(ViolationReason reason) {
    switch (reason) {
    case ViolationReason::excerpt_not_found: return "excerpt-not-found";
    case ViolationReason::bad_action_value: return "bad-action-value";
    case ViolationReason::duplicate_id: return "duplicate-id";
    }
    return "excerpt-not-found";
}

RightsParseError::RightsParseError(ParseErrorKind kind, const std::string& message)
    : Error("rights_" + to_string(kind), message), kind_(kind) {}

nlohmann::json to_json(const Right& r) {
    return {{"id", r.id},
            {"label", r.label},
            {"prompt", r.prompt},
            {"excerpt", r.excerpt},
            {"mechanism", to_string(r.mechanism)},
            {"action_value", r.action_value},
            {"keywords", r.keywords}};
}

nlohmann::json to_json(const RightsAnalysis& a) {
    auto rights = nlohmann::json::array();
    for (const auto& r : a.rights) rights.push_back(to_json(r));
    return {{"site", a.site},         {"policyUrl", a.policy_url}, {"policyHash", a.policy_hash},
            {"modelId", a.model_id},  {"createdAt", a.created_at}, {"rights", rights}};
}

RightsAnalysis analysis_from_json(const nlohmann::json& j) {
    RightsAnalysis a;
    a.site = j.at("site").get<std::string>();
    a.policy_url = j.at("policyUrl").get<std::string>();
    a.policy_hash = j.at("policyHash").get<std::string>();
    a.model_id = j.at("modelId").get<std::string>();
    a.created_at = j.at("createdAt").get<std::string>();
    a.rights = parse_rights_response(nlohmann::json{{"rights", j.at("rights")}}.dump());
    return a;
}

// The extraction schema, rendered as plain text.
const char* const extraction_system_prompt =
    R"(You are a privacy compliance analyst. Given a website's privacy policy excerpt, identify the consumer privacy rights it offers (especially CCPA/CPRA rights). Respond only with JSON in this exact shape:

{"rights": [{
  "id": "...", "label": "...", "prompt": "...",
  "excerpt": "...",
  "mechanism": "email" | "link" | "navigation" | "form",
  "action_value": "...",
  "keywords": [...]}]}

Extract ALL consumer privacy rights stated in the policy. Include every distinct right that has its own mechanism or action.

mechanism: How the user exercises the right (email, link, navigation, or form).

action_value: The specific email address, URL, or navigation path extracted from the text.

If the policy does not describe any rights, return {"rights": []}.)";

const std::vector<std::string>& rights_keywords() {
    static const std::vector<std::string> keywords{"access", "delet",  "opt out", "opt-out",    "correct",
                                                   "ccpa",   "gdpr",   "cpra",    "do not sell"};
    return keywords;
}

bool is_rights_paragraph(std::string_view paragraph) {
    auto lowered = to_lower(paragraph);
    return std::any_of(rights_keywords().begin(), rights_keywords().end(),
                       [&](const std::string& k) { return lowered.find(k) != std::string::npos; });
}

namespace {

constexpr std::string_view excerpt_note =
    "[Excerpted policy: the opening section followed by every paragraph that mentions rights-related terms.]\n\n";
constexpr std::string_view gap_marker = "\n[...]\n";

std::vector<std::string_view> split_paragraphs(std::string_view text) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto para = text.substr(start, end - start);
        if (para.find_first_not_of(" \t\r") != std::string_view::npos) out.push_back(para);
        start = end + 1;
    }
    return out;
}

} // namespace

ExtractionPrompt build_extraction_prompt(std::string_view policy_text, size_t char_budget) {
    if (char_budget == 0) throw ContractViolation("char_budget must be positive");
    ExtractionPrompt prompt;
    prompt.system = extraction_system_prompt;
    if (policy_text.size() <= char_budget) {
        prompt.user = std::string(policy_text);
        return prompt;
    }

    prompt.excerpted = true;
    auto paragraphs = split_paragraphs(policy_text);
    std::vector<bool> keep(paragraphs.size(), false);

    // Keyword paragraphs first, in document order, as long as they fit.
    size_t budget = char_budget > excerpt_note.size() ? char_budget - excerpt_note.size() : 0;
    size_t used = 0;
    auto cost = [&](size_t i) { return paragraphs[i].size() + gap_marker.size(); };
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        if (is_rights_paragraph(paragraphs[i]) && used + cost(i) <= budget) {
            keep[i] = true;
            used += cost(i);
        }
    }
    // Then the head of the document with whatever is left.
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        if (keep[i]) continue;
        if (used + cost(i) > budget) break;
        keep[i] = true;
        used += cost(i);
    }

    std::string body(excerpt_note);
    bool previous_kept = true;
    bool first = true;
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        if (!keep[i]) {
            previous_kept = false;
            continue;
        }
        if (!first) body += previous_kept ? std::string_view("\n") : gap_marker;
        body += paragraphs[i];
        previous_kept = true;
        first = false;
    }
    if (body.size() > char_budget) body.resize(char_budget);
    prompt.user = std::move(body);
    return prompt;
}

namespace {

std::string required_string(const nlohmann::json& item, const char* field, size_t index) {
    if (!item.contains(field))
        throw RightsParseError(ParseErrorKind::missing_field,
                               "rights[" + std::to_string(index) + "] is missing \"" + field + "\"");
    const auto& v = item.at(field);
    if (!v.is_string())
        throw RightsParseError(ParseErrorKind::shape_mismatch,
                               "rights[" + std::to_string(index) + "]." + field + " must be a string");
    auto s = v.get<std::string>();
    if (trim(s).empty())
        throw RightsParseError(ParseErrorKind::missing_field,
                               "rights[" + std::to_string(index) + "]." + field + " is empty");
    return s;
}

std::string optional_string(const nlohmann::json& item, const char* field, size_t index) {
    if (!item.contains(field) || item.at(field).is_null()) return {};
    if (!item.at(field).is_string())
        throw RightsParseError(ParseErrorKind::shape_mismatch,
                               "rights[" + std::to_string(index) + "]." + field + " must be a string");
    return item.at(field).get<std::string>();
}

} // namespace

std::vector<Right> parse_rights_response(std::string_view raw) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(strip_code_fence(raw));
    } catch (const nlohmann::json::exception& e) {
        throw RightsParseError(ParseErrorKind::not_json, std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("rights") || !doc.at("rights").is_array())
        throw RightsParseError(ParseErrorKind::shape_mismatch, "expected an object with a \"rights\" array");

    std::vector<Right> out;
    size_t index = 0;
    for (const auto& item : doc.at("rights")) {
        if (!item.is_object())
            throw RightsParseError(ParseErrorKind::shape_mismatch, "rights[" + std::to_string(index) + "] is not an object");
        Right r;
        r.id = required_string(item, "id", index);
        r.label = required_string(item, "label", index);
        auto mechanism = required_string(item, "mechanism", index);
        auto m = mechanism_from_string(mechanism);
        if (!m)
            throw RightsParseError(ParseErrorKind::illegal_mechanism,
                                   "rights[" + std::to_string(index) + "].mechanism \"" + mechanism + "\" is not one of email, link, navigation, form");
        r.mechanism = *m;
        r.action_value = required_string(item, "action_value", index);
        r.prompt = optional_string(item, "prompt", index);
        r.excerpt = optional_string(item, "excerpt", index);
        if (item.contains("keywords") && !item.at("keywords").is_null()) {
            const auto& kw = item.at("keywords");
            if (!kw.is_array())
                throw RightsParseError(ParseErrorKind::shape_mismatch, "rights[" + std::to_string(index) + "].keywords must be an array");
            for (const auto& k : kw) {
                if (!k.is_string())
                    throw RightsParseError(ParseErrorKind::shape_mismatch,
                                           "rights[" + std::to_string(index) + "].keywords must hold strings");
                r.keywords.push_back(k.get<std::string>());
            }
        }
        out.push_back(std::move(r));
        ++index;
    }
    return out;
}

bool action_value_matches(Mechanism mechanism, std::string_view action_value) {
    auto value = trim(action_value);
    switch (mechanism) {
    case Mechanism::email: {
        auto v = std::string_view(value);
        if (v.starts_with("mailto:")) v.remove_prefix(7);
        return is_email_address(v);
    }
    case Mechanism::link: {
        if (auto u = parse_url(value)) return u->is_http();
        if (value.size() < 2 || value.front() != '/' || value[1] == '/') return false;
        auto base = parse_url("http://site.invalid/");
        return resolve_url(*base, value).has_value() && value.find(' ') == std::string::npos;
    }
    case Mechanism::navigation:
    case Mechanism::form: return !value.empty();
    }
    return false;
}

ValidationResult validate_rights(std::vector<Right> rights, std::string_view policy_text) {
    ValidationResult result;
    auto normalized_policy = normalize_for_match(policy_text);
    std::set<std::string> used;

    for (auto& r : rights) {
        auto slug = slugify(r.id);
        if (slug.empty()) slug = slugify(r.label);
        if (slug.empty()) slug = "right";
        r.id = slug;

        auto excerpt = normalize_for_match(r.excerpt);
        if (excerpt.empty() || normalized_policy.find(excerpt) == std::string::npos) {
            result.violations.push_back({r.id, ViolationReason::excerpt_not_found, "excerpt does not occur in the policy text"});
            continue;
        }
        if (!action_value_matches(r.mechanism, r.action_value)) {
            result.violations.push_back({r.id, ViolationReason::bad_action_value,
                                         "\"" + r.action_value + "\" does not fit mechanism " + to_string(r.mechanism)});
            continue;
        }
        if (!used.insert(r.id).second) {
            auto original = r.id;
            int suffix = 2;
            while (used.count(original + "-" + std::to_string(suffix))) ++suffix;
            r.id = original + "-" + std::to_string(suffix);
            used.insert(r.id);
            result.violations.push_back({original, ViolationReason::duplicate_id, "renamed to " + r.id});
        }
        result.valid.push_back(std::move(r));
    }
    return result;
}

ExtractionOutcome extract_rights_detailed(const discovery::PolicyDocument& doc, llm::Provider& llm,
                                          const ExtractionOptions& options) {
    if (options.max_attempts < 1) throw ContractViolation("max_attempts must be at least 1");
    if (trim(doc.readable_text).empty()) {
        // Nothing to ground an excerpt in, so no right could validate.
        ExtractionOutcome outcome;
        outcome.analysis.site = doc.site;
        outcome.analysis.policy_url = doc.source_url;
        outcome.analysis.policy_hash = doc.content_hash;
        outcome.analysis.created_at = format_utc(options.clock());
        return outcome;
    }

    auto prompt = build_extraction_prompt(doc.readable_text, options.char_budget);
    llm::ChatRequest request;
    request.messages = {{llm::Role::system, prompt.system}, {llm::Role::user, prompt.user}};
    request.expects_json = true;
    request.temperature = options.temperature;
    request.max_output = options.max_output;

    std::string last_error;
    for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
        llm::ChatResponse reply;
        try {
            reply = llm::complete(request, llm);
        } catch (const llm::LlmError& e) {
            throw ExtractionFailed("backend error on attempt " + std::to_string(attempt) + ": " + e.what());
        }
        try {
            auto parsed = parse_rights_response(reply.text);
            auto validated = validate_rights(std::move(parsed), doc.readable_text);
            ExtractionOutcome outcome;
            outcome.analysis.site = doc.site;
            outcome.analysis.policy_url = doc.source_url;
            outcome.analysis.policy_hash = doc.content_hash;
            outcome.analysis.rights = std::move(validated.valid);
            outcome.analysis.model_id = reply.model_id;
            outcome.analysis.created_at = format_utc(options.clock());
            outcome.violations = std::move(validated.violations);
            outcome.attempts = attempt;
            return outcome;
        } catch (const RightsParseError& e) {
            last_error = e.what();
            request.messages.push_back({llm::Role::assistant, reply.text});
            request.messages.push_back(
                {llm::Role::user, "Your previous response could not be parsed: " + last_error +
                                      "\nRespond again with only the JSON object in the exact shape described."});
        }
    }
    throw ExtractionFailed("no parseable response after " + std::to_string(options.max_attempts) +
                           " attempts; last error: " + last_error);
}

RightsAnalysis extract_rights(const discovery::PolicyDocument& doc, llm::Provider& llm, const ExtractionOptions& options) {
    return extract_rights_detailed(doc, llm, options).analysis;
}

} // namespace rightpath::rights
