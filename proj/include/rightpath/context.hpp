// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/discovery.hpp"
#include "rightpath/error.hpp"
#include "rightpath/llm.hpp"
#include "rightpath/rights.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace rightpath::context {

enum class RightCategory { access, deletion, correction, opt_out, limit_sensitive, non_discrimination, other };

std::string to_string(RightCategory c);

/// Keyword classification over the right's id, label and keywords.
RightCategory categorize(const rights::Right& right);

struct StatuteReference {
    RightCategory category;
    std::string citation; // e.g. "Cal. Civ. Code 1798.105"
    std::string summary;
};

/// Static CCPA citation table used to seed prompts and as a last-resort
/// legal reference.
const std::vector<StatuteReference>& ccpa_statutes();
std::optional<StatuteReference> statute_for(const rights::Right& right);

struct Education {
    std::string misconception;
    std::string actually;

    friend bool operator==(const Education&, const Education&) = default;
};

/// Canonical note per category, used when the backend gives none.
Education static_education(const rights::Right& right);

/// "Most people think this means: <misconception>\nActually: <actually>"
std::string format_education(const Education& e);

struct PolicyContext {
    std::string right_id;
    std::string legal_reference;
    std::string policy_excerpt;
    std::string source_url;
    Education education;
    bool fallback = false;

    friend bool operator==(const PolicyContext&, const PolicyContext&) = default;
};

/// {rightId, legalReference, policyExcerpt, sourceUrl, education{misconception, actually}, fallback}
nlohmann::json to_wire(const PolicyContext& ctx);
PolicyContext policy_context_from_wire(const nlohmann::json& j);

extern const char* const context_system_prompt;

/// Paragraphs of the policy around the stored excerpt, capped near
/// `max_chars`.
std::string surrounding_text(const rights::Right& right, std::string_view policy_text, size_t max_chars = 2400);

llm::ChatRequest build_context_prompt(const rights::Right& right, const discovery::PolicyDocument& doc);

class ContextUnavailable : public Error {
public:
    explicit ContextUnavailable(const std::string& message) : Error("context_unavailable", message) {}
};

/// Backend reply is checked against the policy text. A paraphrased excerpt
/// gets one retry asking for verbatim copying; after that the right's own
/// stored excerpt is used (fallback = true). When the backend gives nothing
/// usable, the static table fills the reference and education note.
PolicyContext generate_policy_context(const rights::Right& right, const discovery::PolicyDocument& doc,
                                      llm::Provider& llm);

/// Reader-concurrent cache keyed by (right id, policy hash).
class ContextCache {
public:
    std::optional<PolicyContext> get(const std::string& right_id, const std::string& policy_hash) const;
    void put(const std::string& policy_hash, const PolicyContext& ctx);

private:
    mutable std::shared_mutex mutex_;
    std::map<std::pair<std::string, std::string>, PolicyContext> entries_;
};

} // namespace rightpath::context
