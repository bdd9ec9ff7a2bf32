// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/discovery.hpp"
#include "rightpath/error.hpp"
#include "rightpath/llm.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace rightpath::rights {

enum class Mechanism { email, link, navigation, form };

std::string to_string(Mechanism m);
std::optional<Mechanism> mechanism_from_string(std::string_view s);

struct Right {
    std::string id;
    std::string label;  // action-label button text
    std::string prompt; // conversational ask seeded when the label is chosen
    std::string excerpt;
    Mechanism mechanism = Mechanism::navigation;
    std::string action_value;
    std::vector<std::string> keywords;

    friend bool operator==(const Right&, const Right&) = default;
};

struct RightsAnalysis {
    std::string site;
    std::string policy_url;
    std::string policy_hash;
    std::vector<Right> rights;
    std::string model_id;
    std::string created_at;

    friend bool operator==(const RightsAnalysis&, const RightsAnalysis&) = default;
};

/// Rights array items use the extraction schema's field names verbatim.
nlohmann::json to_json(const Right& right);
nlohmann::json to_json(const RightsAnalysis& analysis);
RightsAnalysis analysis_from_json(const nlohmann::json& j);

extern const char* const extraction_system_prompt;

struct ExtractionPrompt {
    std::string system;
    std::string user; // policy document section, never longer than the char budget
    bool excerpted = false;
};

/// Lowercase markers that keep a paragraph when a long policy is excerpted.
const std::vector<std::string>& rights_keywords();
bool is_rights_paragraph(std::string_view paragraph);

ExtractionPrompt build_extraction_prompt(std::string_view policy_text, size_t char_budget = 50000);

enum class ParseErrorKind { not_json, shape_mismatch, illegal_mechanism, missing_field };

std::string to_string(ParseErrorKind kind);

class RightsParseError : public Error {
public:
    RightsParseError(ParseErrorKind kind, const std::string& message);
    ParseErrorKind kind() const noexcept { return kind_; }

private:
    ParseErrorKind kind_;
};

/// Strict parse of {"rights": [...]}; a ```json fence around the document is
/// tolerated, unknown fields are ignored.
std::vector<Right> parse_rights_response(std::string_view raw);

enum class ViolationReason { excerpt_not_found, bad_action_value, duplicate_id };

std::string to_string(ViolationReason reason);

struct Violation {
    std::string right_id;
    ViolationReason reason;
    std::string detail;
};

struct ValidationResult {
    std::vector<Right> valid;
    std::vector<Violation> violations;
};

bool action_value_matches(Mechanism mechanism, std::string_view action_value);

/// Excerpt must normalized-substring-match the policy and the action value
/// must fit the mechanism; failing rights are dropped. Duplicate ids are
/// kept with a "-2", "-3", ... suffix and reported.
ValidationResult validate_rights(std::vector<Right> rights, std::string_view policy_text);

struct ExtractionOptions {
    int max_attempts = 3;
    size_t char_budget = 50000;
    double temperature = 0.0;
    int max_output = 8192;
    Clock clock = system_clock();
};

class ExtractionFailed : public Error {
public:
    explicit ExtractionFailed(const std::string& message) : Error("extraction_failed", message) {}
};

struct ExtractionOutcome {
    RightsAnalysis analysis;
    std::vector<Violation> violations;
    int attempts = 0;
};

/// build prompt -> complete -> parse -> validate. A parse failure is fed
/// back to the model in a follow-up turn, up to `max_attempts` calls. Blank
/// policy text yields an empty analysis without a backend call.
ExtractionOutcome extract_rights_detailed(const discovery::PolicyDocument& doc, llm::Provider& llm,
                                          const ExtractionOptions& options = {});

RightsAnalysis extract_rights(const discovery::PolicyDocument& doc, llm::Provider& llm,
                              const ExtractionOptions& options = {});

} // namespace rightpath::rights
