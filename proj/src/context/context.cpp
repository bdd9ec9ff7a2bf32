// SPDX-License-Identifier: Apache-2.0
#include "rightpath/context.hpp"

#include "rightpath/text.hpp"

#include <algorithm>
#include <mutex>

namespace rightpath::context {

std::string to_string(RightCategory c) {
    switch (c) {
    case RightCategory::access: return "access";
    case RightCategory::deletion: return "deletion";
    case RightCategory::correction: return "correction";
    case RightCategory::opt_out: return "opt_out";
    case RightCategory::limit_sensitive: return "limit_sensitive";
    case RightCategory::non_discrimination: return "non_discrimination";
    case RightCategory::other: return "other";
    }
    return "other";
}

RightCategory categorize(const rights::Right& right) {
    std::string hay = to_lower(right.id + " " + right.label);
    for (const auto& k : right.keywords) hay += " " + to_lower(k);
    auto has = [&](std::initializer_list<const char*> words) {
        return std::any_of(words.begin(), words.end(), [&](const char* w) { return hay.find(w) != std::string::npos; });
    };
    // Order matters: "do not sell" and "limit sensitive" mention data types
    // that would otherwise match broader categories.
    if (has({"sensitive"})) return RightCategory::limit_sensitive;
    if (has({"opt-out", "opt out", "opt_out", "optout", "sell", "sale", "sharing", "targeted ad"}))
        return RightCategory::opt_out;
    if (has({"delet", "erase", "erasure", "remove"})) return RightCategory::deletion;
    if (has({"correct", "rectif", "fix inaccurate", "update your"})) return RightCategory::correction;
    if (has({"discriminat"})) return RightCategory::non_discrimination;
    if (has({"access", "know", "download", "copy", "export", "portab"})) return RightCategory::access;
    return RightCategory::other;
}

const std::vector<StatuteReference>& ccpa_statutes() {
    static const std::vector<StatuteReference> table{
        {RightCategory::access, "Cal. Civ. Code 1798.100 and 1798.110",
         "the right to know what personal information a business collects about you and to get a copy of it"},
        {RightCategory::deletion, "Cal. Civ. Code 1798.105",
         "the right to ask a business to delete personal information it collected from you"},
        {RightCategory::correction, "Cal. Civ. Code 1798.106",
         "the right to ask a business to correct inaccurate personal information"},
        {RightCategory::opt_out, "Cal. Civ. Code 1798.120",
         "the right to opt out of the sale or sharing of your personal information"},
        {RightCategory::limit_sensitive, "Cal. Civ. Code 1798.121",
         "the right to limit the use and disclosure of sensitive personal information"},
        {RightCategory::non_discrimination, "Cal. Civ. Code 1798.125",
         "the right not to be treated differently for exercising your privacy rights"},
    };
    return table;
}

std::optional<StatuteReference> statute_for(const rights::Right& right) {
    auto category = categorize(right);
    for (const auto& s : ccpa_statutes())
        if (s.category == category) return s;
    return std::nullopt;
}

Education static_education(const rights::Right& right) {
    switch (categorize(right)) {
    case RightCategory::access:
        return {"you only get back the information you typed in yourself.",
                "the business must also disclose what it inferred or collected about you, where it came from, and "
                "who it was shared with."};
    case RightCategory::deletion:
        return {"every copy of your data disappears immediately and everywhere.",
                "the business must delete what it collected from you and tell its service providers to do the same, "
                "but some records may be kept where the law allows, such as to complete a transaction or meet legal "
                "duties."};
    case RightCategory::correction:
        return {"you can only fix your profile fields in account settings.",
                "you can ask the business to correct any inaccurate personal information it holds, and it must use "
                "commercially reasonable efforts to do so."};
    case RightCategory::opt_out:
        return {"opting out deletes the data the company already has about you.",
                "opting out stops future selling or sharing of your personal information; deleting what is already "
                "held is a separate request."};
    case RightCategory::limit_sensitive:
        return {"a business can use sensitive information however it likes once you have agreed to its terms.",
                "you can direct the business to use sensitive personal information only for what is needed to "
                "provide the service you asked for."};
    case RightCategory::non_discrimination:
        return {"using your privacy rights means losing access to the service.",
                "a business may not deny service or charge a different price because you exercised a privacy "
                "right, though it may offer disclosed financial incentives."};
    case RightCategory::other: break;
    }
    return {"privacy settings only change what you see, not what the company does with your data.",
            "the policy describes a specific action the company must honor when you ask."};
}

std::string format_education(const Education& e) {
    return "Most people think this means: " + e.misconception + "\nActually: " + e.actually;
}

nlohmann::json to_wire(const PolicyContext& ctx) {
    return {{"rightId", ctx.right_id},
            {"legalReference", ctx.legal_reference},
            {"policyExcerpt", ctx.policy_excerpt},
            {"sourceUrl", ctx.source_url},
            {"education", {{"misconception", ctx.education.misconception}, {"actually", ctx.education.actually}}},
            {"fallback", ctx.fallback}};
}

PolicyContext policy_context_from_wire(const nlohmann::json& j) {
    PolicyContext ctx;
    ctx.right_id = j.at("rightId").get<std::string>();
    ctx.legal_reference = j.at("legalReference").get<std::string>();
    ctx.policy_excerpt = j.at("policyExcerpt").get<std::string>();
    ctx.source_url = j.at("sourceUrl").get<std::string>();
    ctx.education.misconception = j.at("education").at("misconception").get<std::string>();
    ctx.education.actually = j.at("education").at("actually").get<std::string>();
    ctx.fallback = j.at("fallback").get<bool>();
    return ctx;
}

const char* const context_system_prompt =
    R"(You explain consumer privacy rights in plain language. Given one right found in a company's privacy policy, respond only with JSON in this exact shape:

{"legal_reference": "...", "policy_excerpt": "...", "education": {"misconception": "...", "actually": "..."}}

legal_reference: One or two plain sentences on which California privacy law provision grants this right and what it lets the user do. This is an explanation, not legal advice.

policy_excerpt: The sentence or sentences from the supplied policy text that describe this right, copied character for character. Do not paraphrase, shorten, or fix typos.

education: A common misunderstanding about this right ("Most people think this means ...") and what it actually means ("Actually ...").)";

std::string surrounding_text(const rights::Right& right, std::string_view policy_text, size_t max_chars) {
    std::vector<std::string> paragraphs;
    size_t start = 0;
    while (start <= policy_text.size()) {
        auto end = policy_text.find("\n\n", start);
        if (end == std::string_view::npos) end = policy_text.size();
        auto p = trim(policy_text.substr(start, end - start));
        if (!p.empty()) paragraphs.push_back(std::move(p));
        start = end + 2;
    }
    if (paragraphs.empty()) return {};

    auto needle = normalize_for_match(right.excerpt);
    if (needle.size() > 80) needle.resize(80);
    size_t hit = paragraphs.size();
    if (!needle.empty())
        for (size_t i = 0; i < paragraphs.size(); ++i)
            if (normalize_for_match(paragraphs[i]).find(needle) != std::string::npos) {
                hit = i;
                break;
            }
    if (hit == paragraphs.size()) hit = 0;

    // Grow outward from the hit, preferring the paragraph before.
    size_t lo = hit, hi = hit + 1;
    size_t used = paragraphs[hit].size();
    while (true) {
        bool grew = false;
        if (lo > 0 && used + paragraphs[lo - 1].size() + 2 <= max_chars) {
            used += paragraphs[--lo].size() + 2;
            grew = true;
        }
        if (hi < paragraphs.size() && used + paragraphs[hi].size() + 2 <= max_chars) {
            used += paragraphs[hi++].size() + 2;
            grew = true;
        }
        if (!grew) break;
    }
    std::string out;
    for (size_t i = lo; i < hi; ++i) out += (out.empty() ? "" : "\n\n") + paragraphs[i];
    if (out.size() > max_chars) out.resize(max_chars);
    return out;
}

llm::ChatRequest build_context_prompt(const rights::Right& right, const discovery::PolicyDocument& doc) {
    std::string user = "Company: " + doc.site + "\nRight: " + right.label + "\n";
    if (auto statute = statute_for(right))
        user += "CCPA provision: " + statute->citation + " (" + statute->summary + ")\n";
    else
        user += "CCPA provision: identify the closest provision of the California Consumer Privacy Act\n";
    if (!right.keywords.empty()) {
        user += "Keywords:";
        for (const auto& k : right.keywords) user += " " + k;
        user += "\n";
    }
    user += "Stored excerpt: \"" + trim(right.excerpt) + "\"\n\nPolicy text:\n" +
            surrounding_text(right, doc.readable_text) + "\n";

    llm::ChatRequest request;
    request.messages = {{llm::Role::system, context_system_prompt}, {llm::Role::user, std::move(user)}};
    request.expects_json = true;
    request.temperature = 0.0;
    request.max_output = 1024;
    return request;
}

namespace {

struct Reply {
    std::string legal_reference;
    std::string policy_excerpt;
    Education education;
};

std::optional<Reply> parse_reply(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(strip_code_fence(text));
        Reply r;
        r.legal_reference = trim(j.at("legal_reference").get<std::string>());
        r.policy_excerpt = trim(j.at("policy_excerpt").get<std::string>());
        const auto& e = j.at("education");
        r.education.misconception = trim(e.at("misconception").get<std::string>());
        r.education.actually = trim(e.at("actually").get<std::string>());
        return r;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

} // namespace

PolicyContext generate_policy_context(const rights::Right& right, const discovery::PolicyDocument& doc,
                                      llm::Provider& llm) {
    auto request = build_context_prompt(right, doc);
    auto verified = [&](const std::string& excerpt) { return normalized_contains(doc.readable_text, excerpt); };

    PolicyContext ctx;
    ctx.right_id = right.id;
    ctx.source_url = doc.source_url;

    std::optional<Reply> best;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string text;
        try {
            text = llm::complete(request, llm).text;
        } catch (const llm::LlmError&) {
            continue;
        }
        auto reply = parse_reply(text);
        if (reply && !reply->legal_reference.empty()) best = reply;
        if (reply && verified(reply->policy_excerpt) && !reply->legal_reference.empty()) {
            ctx.legal_reference = reply->legal_reference;
            ctx.policy_excerpt = reply->policy_excerpt;
            ctx.education = reply->education;
            break;
        }
        request.messages.push_back({llm::Role::assistant, text});
        request.messages.push_back(
            {llm::Role::user, reply ? "The policy_excerpt is not a verbatim passage of the policy text. Copy the "
                                      "relevant sentences exactly as they appear and reply with the same JSON shape."
                                    : "That reply was not the requested JSON. Reply with the exact JSON shape only, "
                                      "copying policy_excerpt verbatim from the policy text."});
    }

    if (ctx.policy_excerpt.empty()) {
        if (!verified(right.excerpt))
            throw ContextUnavailable("no verifiable policy excerpt for right '" + right.id + "'");
        ctx.policy_excerpt = trim(right.excerpt);
        ctx.fallback = true;
        if (best) {
            ctx.legal_reference = best->legal_reference;
            ctx.education = best->education;
        } else if (auto statute = statute_for(right)) {
            ctx.legal_reference = "Under " + statute->citation + ", California residents have " + statute->summary + ".";
        } else {
            ctx.legal_reference = "The California Consumer Privacy Act gives California residents rights over the "
                                  "personal information businesses hold about them.";
        }
    }
    auto fallback_note = static_education(right);
    if (ctx.education.misconception.empty()) ctx.education.misconception = fallback_note.misconception;
    if (ctx.education.actually.empty()) ctx.education.actually = fallback_note.actually;
    return ctx;
}

std::optional<PolicyContext> ContextCache::get(const std::string& right_id, const std::string& policy_hash) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find({right_id, policy_hash});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ContextCache::put(const std::string& policy_hash, const PolicyContext& ctx) {
    std::unique_lock lock(mutex_);
    entries_[{ctx.right_id, policy_hash}] = ctx;
}

} // namespace rightpath::context
