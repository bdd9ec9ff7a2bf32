// SPDX-License-Identifier: Apache-2.0
#include "rightpath/eval.hpp"

#include "rightpath/text.hpp"
#include "rightpath/url.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace rightpath::eval {

namespace {

constexpr double stated_tolerance = 0.0005 + 1e-9; // three-decimal rounding

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

double ratio(int num, int den) { return den == 0 ? 1.0 : static_cast<double>(num) / den; }

template <typename T, typename F>
double mean_of(const std::vector<T>& xs, F f) {
    double sum = 0.0;
    for (const auto& x : xs) sum += f(x);
    return sum / static_cast<double>(xs.size());
}

} // namespace

SiteExtractionReport site_report(std::string site, int tp, int n_labels, int n_gt) {
    if (tp < 0 || n_labels < 0 || n_gt < 0) throw ContractViolation("negative count in report for " + site);
    if (tp > std::min(n_labels, n_gt))
        throw ContractViolation(fmt::format("tp={} exceeds min(labels={}, gt={}) for {}", tp, n_labels, n_gt, site));
    SiteExtractionReport r;
    r.site = std::move(site);
    r.n_labels = n_labels;
    r.n_gt = n_gt;
    r.tp = tp;
    r.fp = n_labels - tp;
    r.fn = n_gt - tp;
    r.precision = ratio(tp, n_labels);
    r.recall = ratio(tp, n_gt);
    r.f1 = f1_of(r.precision, r.recall);
    return r;
}

SiteExtractionReport site_report_from_stated(std::string site, int n_labels, int n_gt, double precision,
                                             double recall) {
    if (n_labels < 0 || n_gt < 0) throw ContractViolation("negative count in report for " + site);
    if (precision < 0 || precision > 1 || recall < 0 || recall > 1)
        throw ContractViolation("stated ratios out of [0, 1] for " + site);
    int tp = std::clamp(static_cast<int>(std::lround(recall * n_gt)), 0, std::min(n_labels, n_gt));
    auto r = site_report(std::move(site), tp, n_labels, n_gt);
    r.precision = precision;
    r.recall = recall;
    r.f1 = f1_of(precision, recall);

    std::optional<int> reproducing;
    for (int t = 0; t <= std::min(n_labels, n_gt); ++t)
        if (std::abs(ratio(t, n_labels) - precision) <= stated_tolerance &&
            std::abs(ratio(t, n_gt) - recall) <= stated_tolerance) {
            reproducing = t;
            break;
        }
    if (!reproducing)
        r.inconsistency = fmt::format("no integer true-positive count gives precision {:.3f} over {} labels and "
                                      "recall {:.3f} over {} ground-truth rights",
                                      precision, n_labels, recall, n_gt);
    return r;
}

ExtractionMetrics aggregate_extraction(const std::vector<SiteExtractionReport>& reports) {
    if (reports.empty()) throw ContractViolation("aggregate_extraction needs at least one site report");
    ExtractionMetrics m;
    m.reports = reports;
    m.macro_precision = mean_of(reports, [](const auto& r) { return r.precision; });
    m.macro_recall = mean_of(reports, [](const auto& r) { return r.recall; });
    m.macro_f1 = mean_of(reports, [](const auto& r) { return r.f1; });
    m.mean_labels = mean_of(reports, [](const auto& r) { return static_cast<double>(r.n_labels); });
    m.mean_gt = mean_of(reports, [](const auto& r) { return static_cast<double>(r.n_gt); });
    return m;
}

std::vector<SiteExtractionReport> evaluate_extraction(const Corpus& corpus,
                                                      const std::vector<rights::RightsAnalysis>& analyses,
                                                      const MatchRule& rule) {
    auto key = [](const std::string& site) {
        if (auto u = parse_url(site)) return registrable_domain(u->host);
        return registrable_domain(to_lower(trim(site)));
    };
    std::map<std::string, const rights::RightsAnalysis*> by_site;
    for (const auto& a : analyses) by_site[key(a.site)] = &a;

    std::vector<SiteExtractionReport> reports;
    for (const auto& [site, gt] : corpus.sites) {
        auto it = by_site.find(key(site));
        std::vector<rights::Right> extracted;
        if (it != by_site.end()) extracted = it->second->rights;
        auto matches = match_rights(extracted, gt, rule);
        reports.push_back(site_report(site, static_cast<int>(matches.size()), static_cast<int>(extracted.size()),
                                      static_cast<int>(gt.size())));
    }
    return reports;
}

std::vector<SiteExtractionReport> stated_reports_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ContractViolation("stated table must be a JSON array");
    std::vector<SiteExtractionReport> out;
    for (const auto& row : j)
        out.push_back(site_report_from_stated(row.at("site").get<std::string>(), row.at("labels").get<int>(),
                                              row.at("gt").get<int>(), row.at("precision").get<double>(),
                                              row.at("recall").get<double>()));
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(TaskType t) {
    switch (t) {
    case TaskType::access: return "access";
    case TaskType::delete_data: return "delete";
    case TaskType::opt_out: return "opt_out";
    case TaskType::correction: return "correction";
    }
    return "access";
}

std::string display_name(TaskType t) {
    switch (t) {
    case TaskType::access: return "Access";
    case TaskType::delete_data: return "Delete";
    case TaskType::opt_out: return "Opt-out";
    case TaskType::correction: return "Correction";
    }
    return "Access";
}

TaskType task_type_from_string(const std::string& s) {
    auto v = to_lower(trim(s));
    if (v == "access") return TaskType::access;
    if (v == "delete") return TaskType::delete_data;
    if (v == "opt_out" || v == "opt-out") return TaskType::opt_out;
    if (v == "correction") return TaskType::correction;
    throw ContractViolation("unknown task type '" + s + "'");
}

std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::success: return "success";
    case Outcome::partial: return "partial";
    case Outcome::failure: return "failure";
    }
    return "failure";
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "success") return Outcome::success;
    if (s == "partial") return Outcome::partial;
    if (s == "failure") return Outcome::failure;
    throw ContractViolation("unknown outcome '" + s + "'");
}

RecordError::RecordError(size_t line, const std::string& message)
    : Error("task_record_invalid", "line " + std::to_string(line) + ": " + message), line_(line) {}

std::vector<TaskRecord> parse_task_records(std::string_view jsonl) {
    std::vector<TaskRecord> out;
    size_t line_no = 0;
    for (const auto& line : split(jsonl, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            TaskRecord r;
            r.site = j.at("site").get<std::string>();
            r.task_type = task_type_from_string(j.at("task_type").get<std::string>());
            r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
            r.steps = j.at("steps").get<int>();
            if (r.steps < 1) throw ContractViolation("steps must be at least 1");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw RecordError(line_no, e.what());
        } catch (const ContractViolation& e) {
            throw RecordError(line_no, e.what());
        }
    }
    return out;
}

std::vector<TaskRecord> load_task_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RecordError(0, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_task_records(ss.str());
}

WorkflowMetrics aggregate_workflow(const std::vector<TaskRecord>& records) {
    if (records.empty()) throw ContractViolation("aggregate_workflow needs at least one record");
    WorkflowMetrics m;
    auto add = [](WorkflowRow& row, const TaskRecord& r) {
        ++row.total;
        row.step_sum += r.steps;
        switch (r.outcome) {
        case Outcome::success: ++row.success; break;
        case Outcome::partial: ++row.partial; break;
        case Outcome::failure: ++row.failure; break;
        }
    };
    for (const auto& r : records) {
        add(m.by_type[r.task_type], r);
        add(m.overall, r);
    }
    auto finish = [](WorkflowRow& row) {
        row.success_rate = static_cast<double>(row.success) / row.total;
        row.mean_steps = static_cast<double>(row.step_sum) / row.total;
    };
    for (auto& [t, row] : m.by_type) finish(row);
    finish(m.overall);
    return m;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ExtractionMetrics& m) {
    auto reports = nlohmann::json::array();
    for (const auto& r : m.reports) {
        nlohmann::json j = {{"site", r.site},     {"labels", r.n_labels},      {"gt", r.n_gt},
                            {"tp", r.tp},         {"fp", r.fp},                {"fn", r.fn},
                            {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
        if (r.inconsistency) j["inconsistency"] = *r.inconsistency;
        reports.push_back(std::move(j));
    }
    return {{"reports", reports},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"macro_f1", m.macro_f1},
            {"mean_labels", m.mean_labels},
            {"mean_gt", m.mean_gt}};
}

ExtractionMetrics extraction_metrics_from_json(const nlohmann::json& j) {
    ExtractionMetrics m;
    for (const auto& r : j.at("reports")) {
        SiteExtractionReport s;
        s.site = r.at("site").get<std::string>();
        s.n_labels = r.at("labels").get<int>();
        s.n_gt = r.at("gt").get<int>();
        s.tp = r.at("tp").get<int>();
        s.fp = r.at("fp").get<int>();
        s.fn = r.at("fn").get<int>();
        s.precision = r.at("precision").get<double>();
        s.recall = r.at("recall").get<double>();
        s.f1 = r.at("f1").get<double>();
        if (r.contains("inconsistency")) s.inconsistency = r.at("inconsistency").get<std::string>();
        m.reports.push_back(std::move(s));
    }
    m.macro_precision = j.at("macro_precision").get<double>();
    m.macro_recall = j.at("macro_recall").get<double>();
    m.macro_f1 = j.at("macro_f1").get<double>();
    m.mean_labels = j.at("mean_labels").get<double>();
    m.mean_gt = j.at("mean_gt").get<double>();
    return m;
}

namespace {

nlohmann::json row_json(const WorkflowRow& r) {
    return {{"total", r.total},     {"success", r.success},           {"partial", r.partial},
            {"failure", r.failure}, {"step_sum", r.step_sum},         {"success_rate", r.success_rate},
            {"mean_steps", r.mean_steps}};
}

WorkflowRow row_from_json(const nlohmann::json& j) {
    WorkflowRow r;
    r.total = j.at("total").get<int>();
    r.success = j.at("success").get<int>();
    r.partial = j.at("partial").get<int>();
    r.failure = j.at("failure").get<int>();
    r.step_sum = j.at("step_sum").get<int>();
    r.success_rate = j.at("success_rate").get<double>();
    r.mean_steps = j.at("mean_steps").get<double>();
    return r;
}

} // namespace

nlohmann::json to_json(const WorkflowMetrics& m) {
    auto by_type = nlohmann::json::array();
    for (const auto& [t, row] : m.by_type) {
        auto j = row_json(row);
        j["task_type"] = to_string(t);
        by_type.push_back(std::move(j));
    }
    return {{"by_type", by_type}, {"overall", row_json(m.overall)}};
}

WorkflowMetrics workflow_metrics_from_json(const nlohmann::json& j) {
    WorkflowMetrics m;
    for (const auto& row : j.at("by_type"))
        m.by_type[task_type_from_string(row.at("task_type").get<std::string>())] = row_from_json(row);
    m.overall = row_from_json(j.at("overall"));
    return m;
}

std::string emit_report(const ExtractionMetrics& m, Format format) {
    if (m.reports.empty()) throw ContractViolation("cannot emit an extraction report with no sites");
    if (format == Format::json) return to_json(m).dump(2) + "\n";

    std::string out = "| Site | action labels | GT Rights | Precision | Recall |\n"
                      "|---|---|---|---|---|\n";
    std::vector<std::string> notes;
    for (const auto& r : m.reports) {
        out += fmt::format("| {} | {} | {} | {:.3f} | {:.3f} |\n", r.site, r.n_labels, r.n_gt, r.precision, r.recall);
        if (r.inconsistency) notes.push_back(r.site + ": " + *r.inconsistency);
    }
    out += fmt::format("| **Mean** | **{:.1f}** | **{:.1f}** | **{:.3f}** | **{:.3f}** |\n", m.mean_labels, m.mean_gt,
                       m.macro_precision, m.macro_recall);
    out += fmt::format("\nMacro F1 (mean of per-site F1): {:.3f}\n", m.macro_f1);
    if (!notes.empty()) {
        out += "\nInconsistent rows:\n";
        for (const auto& n : notes) out += "- " + n + "\n";
    }
    return out;
}

std::string emit_report(const WorkflowMetrics& m, Format format) {
    if (m.overall.total == 0) throw ContractViolation("cannot emit a workflow report with no records");
    if (format == Format::json) return to_json(m).dump(2) + "\n";

    std::string out = "| Task Type | Total | Success | Partial | Failure | Mean Steps |\n"
                      "|---|---|---|---|---|---|\n";
    auto row = [](const std::string& name, const WorkflowRow& r) {
        return fmt::format("| {} | {} | {} | {} | {} | {:.1f} |\n", name, r.total, r.success, r.partial, r.failure,
                           r.mean_steps);
    };
    for (const auto& [t, r] : m.by_type) out += row(display_name(t), r);
    out += row("**All**", m.overall);
    out += fmt::format("\nSuccess rate: {:.1f}% ({}/{}); mean steps {:.3f}\n", 100.0 * m.overall.success_rate,
                       m.overall.success, m.overall.total, m.overall.mean_steps);
    return out;
}

} // namespace rightpath::eval
