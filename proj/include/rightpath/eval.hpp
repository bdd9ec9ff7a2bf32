// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/error.hpp"
#include "rightpath/rights.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rightpath::eval {

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruthRight {
    std::string site;
    std::string label;
    rights::Mechanism mechanism = rights::Mechanism::navigation;
    std::optional<std::string> action_value;
    std::string jurisdiction; // e.g. "CCPA", "GDPR"
};

struct Corpus {
    std::map<std::string, std::vector<GroundTruthRight>> sites; // in file order within a site
    size_t size() const;
};

class CorpusError : public Error {
public:
    CorpusError(size_t row, const std::string& message);
    /// 1-based position in the array; 0 for file-level problems.
    size_t row() const noexcept { return row_; }

private:
    size_t row_;
};

/// JSON array of {site, label, mechanism, action_value?, jurisdiction}.
/// Duplicate (site, label) pairs are rejected, labels compared after
/// whitespace collapse and case folding.
Corpus corpus_from_json(const nlohmann::json& j);
Corpus load_corpus(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Matching

struct MatchRule {
    double threshold = 0.5;
};

/// Lowercased alphanumeric tokens with stop words removed, deduplicated.
std::vector<std::string> label_tokens(std::string_view label);

/// Jaccard similarity of the two token sets; 0 when either set is empty.
double label_similarity(std::string_view a, std::string_view b);

/// Similarity of an eligible pair, or nullopt. Equal non-empty action values
/// make a pair eligible with similarity 1.
std::optional<double> pair_similarity(const rights::Right& extracted, const GroundTruthRight& gt,
                                      const MatchRule& rule = {});

struct MatchPair {
    size_t extracted;
    size_t gt;
    double similarity;
};

struct MatchScore {
    size_t cardinality = 0;
    double total_similarity = 0.0;
};

/// Lexicographic: more pairs first, then higher similarity sum (1e-9 slack).
bool better(const MatchScore& a, const MatchScore& b);

MatchScore score_of(const std::vector<MatchPair>& pairs);

/// Eligibility matrix: rows extracted, columns ground truth.
using SimilarityMatrix = std::vector<std::vector<std::optional<double>>>;

SimilarityMatrix similarity_matrix(const std::vector<rights::Right>& extracted,
                                   const std::vector<GroundTruthRight>& gt, const MatchRule& rule = {});

/// Highest-similarity-first greedy pass.
std::vector<MatchPair> greedy_match(const SimilarityMatrix& sim);

/// Maximum-cardinality, then maximum-similarity assignment.
std::vector<MatchPair> optimal_match(const SimilarityMatrix& sim);

/// Greedy pass, replaced by the optimal assignment whenever greedy scores
/// lower. Each side is matched at most once.
std::vector<MatchPair> match_rights(const std::vector<rights::Right>& extracted,
                                    const std::vector<GroundTruthRight>& gt, const MatchRule& rule = {});

// ---------------------------------------------------------------------------
// Extraction metrics

struct SiteExtractionReport {
    std::string site;
    int n_labels = 0;
    int n_gt = 0;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
    /// Set when stated ratios cannot come from any integer true-positive count.
    std::optional<std::string> inconsistency;
};

/// Precision is 1 when nothing was extracted; recall is 1 when the ground
/// truth is empty; F1 is 0 when precision + recall is 0.
SiteExtractionReport site_report(std::string site, int tp, int n_labels, int n_gt);

/// Reported ratios as stated (three decimals), with tp taken from the
/// recall side. Rows that no integer tp reproduces are flagged.
SiteExtractionReport site_report_from_stated(std::string site, int n_labels, int n_gt, double precision,
                                             double recall);

struct ExtractionMetrics {
    std::vector<SiteExtractionReport> reports;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double mean_labels = 0.0;
    double mean_gt = 0.0;
};

ExtractionMetrics aggregate_extraction(const std::vector<SiteExtractionReport>& reports);

/// Per-site reports from a corpus and extracted analyses. Sites without an
/// analysis count as zero labels.
std::vector<SiteExtractionReport> evaluate_extraction(const Corpus& corpus,
                                                      const std::vector<rights::RightsAnalysis>& analyses,
                                                      const MatchRule& rule = {});

/// JSON array of {site, labels, gt, precision, recall}.
std::vector<SiteExtractionReport> stated_reports_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Workflow metrics

enum class TaskType { access, delete_data, opt_out, correction };
enum class Outcome { success, partial, failure };

std::string to_string(TaskType t);
std::string display_name(TaskType t);
TaskType task_type_from_string(const std::string& s);
std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct TaskRecord {
    std::string site;
    TaskType task_type = TaskType::access;
    Outcome outcome = Outcome::success;
    int steps = 1;
};

class RecordError : public Error {
public:
    RecordError(size_t line, const std::string& message);
    size_t line() const noexcept { return line_; }

private:
    size_t line_;
};

/// JSON-lines of {site, task_type, outcome, steps}; blank lines skipped.
std::vector<TaskRecord> load_task_records(const std::filesystem::path& path);
std::vector<TaskRecord> parse_task_records(std::string_view jsonl);

struct WorkflowRow {
    int total = 0;
    int success = 0;
    int partial = 0;
    int failure = 0;
    int step_sum = 0;
    double success_rate = 0.0;
    double mean_steps = 0.0;
};

struct WorkflowMetrics {
    std::map<TaskType, WorkflowRow> by_type; // only types present in the records
    WorkflowRow overall;
};

WorkflowMetrics aggregate_workflow(const std::vector<TaskRecord>& records);

// ---------------------------------------------------------------------------
// Reports

enum class Format { json, markdown };

nlohmann::json to_json(const ExtractionMetrics& m);
ExtractionMetrics extraction_metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WorkflowMetrics& m);
WorkflowMetrics workflow_metrics_from_json(const nlohmann::json& j);

/// Throws ContractViolation on metrics with no reports / records.
std::string emit_report(const ExtractionMetrics& m, Format format);
std::string emit_report(const WorkflowMetrics& m, Format format);

} // namespace rightpath::eval
