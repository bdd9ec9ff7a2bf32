// SPDX-License-Identifier: Apache-2.0
#include "rightpath/eval.hpp"

#include "rightpath/text.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace rightpath;
using namespace rightpath::eval;

namespace {

std::vector<SiteExtractionReport> stated_sites() { return stated_reports_from_json(testing::read_json("eval/site_rates_14.json")); }

// Macro means recomputed straight from the fixture, without the library.
struct Means {
    double p = 0, r = 0, f1 = 0, labels = 0, gt = 0;
};
Means oracle_means(const nlohmann::json& rows, const std::string& skip = "") {
    Means m;
    int n = 0;
    for (const auto& row : rows) {
        if (row["site"] == skip) continue;
        double p = row["precision"], r = row["recall"];
        m.p += p;
        m.r += r;
        m.f1 += (p + r) > 0 ? 2 * p * r / (p + r) : 0;
        m.labels += row["labels"].get<double>();
        m.gt += row["gt"].get<double>();
        ++n;
    }
    m.p /= n;
    m.r /= n;
    m.f1 /= n;
    m.labels /= n;
    m.gt /= n;
    return m;
}

rights::Right extracted(const std::string& label, rights::Mechanism m = rights::Mechanism::navigation,
                        const std::string& value = "v") {
    rights::Right r;
    r.id = slugify(label);
    r.label = label;
    r.mechanism = m;
    r.action_value = value;
    return r;
}

GroundTruthRight truth(const std::string& label, rights::Mechanism m = rights::Mechanism::navigation,
                       std::optional<std::string> value = std::nullopt) {
    return {"s.test", label, m, std::move(value), "CCPA"};
}

void check_injective(const std::vector<MatchPair>& pairs) {
    std::set<size_t> rows, cols;
    for (const auto& p : pairs) {
        CHECK(rows.insert(p.extracted).second);
        CHECK(cols.insert(p.gt).second);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Per-site extraction rates

TEST_CASE("stated per-site rates reproduce the reported means") {
    auto m = aggregate_extraction(stated_sites());
    CHECK(m.reports.size() == 14);
    CHECK(std::abs(m.macro_precision - 0.979) <= 0.001);
    CHECK(std::abs(m.macro_recall - 0.813) <= 0.001);
    CHECK(std::abs(m.macro_f1 - 0.885) <= 0.001);
    CHECK(std::abs(m.mean_labels - 10.4) <= 0.05);
    CHECK(std::abs(m.mean_gt - 13.2) <= 0.05);

    auto oracle = oracle_means(testing::read_json("eval/site_rates_14.json"));
    CHECK(m.macro_precision == doctest::Approx(oracle.p).epsilon(1e-12));
    CHECK(m.macro_recall == doctest::Approx(oracle.r).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
    CHECK(m.mean_labels == doctest::Approx(oracle.labels));
    // Harmonic mean of the macro ratios would be 0.888; the mean of per-site F1 is what matches.
    CHECK(std::abs(2 * m.macro_precision * m.macro_recall / (m.macro_precision + m.macro_recall) - 0.888) <= 0.001);

    // 2 of 145 labels unmatched, read off the precision column.
    int labels = 0;
    long unmatched = 0;
    for (const auto& row : testing::read_json("eval/site_rates_14.json")) {
        labels += row["labels"].get<int>();
        unmatched += std::lround((1.0 - row["precision"].get<double>()) * row["labels"].get<int>());
    }
    CHECK(labels == 145);
    CHECK(unmatched == 2);
}

TEST_CASE("excluding Airbnb raises mean recall to 0.841") {
    auto reports = stated_sites();
    reports.erase(std::remove_if(reports.begin(), reports.end(), [](const auto& r) { return r.site == "Airbnb"; }),
                  reports.end());
    auto m = aggregate_extraction(reports);
    CHECK(std::abs(m.macro_recall - 0.841) <= 0.001);
    CHECK(m.macro_recall == doctest::Approx(oracle_means(testing::read_json("eval/site_rates_14.json"), "Airbnb").r));
}

TEST_CASE("stated rows that no integer count reproduces are flagged") {
    std::vector<std::string> flagged;
    for (const auto& r : stated_sites())
        if (r.inconsistency) flagged.push_back(r.site);
    CHECK(flagged == std::vector<std::string>{"Airbnb", "Amazon", "Facebook", "Netflix", "NYTimes", "Target", "Walmart",
                                              "WebMD", "X (Twitter)"});
    auto spotify = stated_sites().front();
    CHECK(spotify.tp == 11);
    CHECK(spotify.fn == 2);
    CHECK_FALSE(spotify.inconsistency);
}

TEST_CASE("site reports follow the empty-set conventions") {
    auto none = site_report("a", 0, 0, 0);
    CHECK(none.precision == 1.0);
    CHECK(none.recall == 1.0);
    auto missed = site_report("b", 0, 0, 5);
    CHECK(missed.precision == 1.0);
    CHECK(missed.recall == 0.0);
    CHECK(missed.f1 == doctest::Approx(0.0));
    auto wrong = site_report("c", 0, 3, 5);
    CHECK(wrong.f1 == 0.0);
    CHECK_THROWS_AS(site_report("d", 4, 3, 5), ContractViolation);
    CHECK_THROWS_AS(site_report_from_stated("e", 3, 5, 1.2, 0.5), ContractViolation);
    CHECK_THROWS_AS(aggregate_extraction({}), ContractViolation);
}

TEST_CASE("count algebra holds for random match sets") {
    std::mt19937 rng(31);
    for (int i = 0; i < 300; ++i) {
        int n_labels = static_cast<int>(rng() % 20);
        int n_gt = static_cast<int>(rng() % 20);
        int tp = static_cast<int>(rng() % (std::min(n_labels, n_gt) + 1));
        auto r = site_report("s", tp, n_labels, n_gt);
        CHECK(r.tp + r.fp == n_labels);
        CHECK(r.tp + r.fn == n_gt);
        CHECK(r.precision >= 0.0);
        CHECK(r.recall <= 1.0);
    }
    for (int i = 0; i < 100; ++i) {
        auto c = testing::random_match_case(rng);
        auto pairs = match_rights(c.extracted, c.gt);
        auto r = site_report("s", static_cast<int>(pairs.size()), static_cast<int>(c.extracted.size()),
                             static_cast<int>(c.gt.size()));
        CHECK(r.tp + r.fp == static_cast<int>(c.extracted.size()));
        CHECK(r.tp + r.fn == static_cast<int>(c.gt.size()));
    }
}

TEST_CASE("macro means do not depend on site order") {
    auto reports = stated_sites();
    auto base = aggregate_extraction(reports);
    std::mt19937 rng(8);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(reports.begin(), reports.end(), rng);
        auto m = aggregate_extraction(reports);
        CHECK(m.macro_precision == doctest::Approx(base.macro_precision).epsilon(1e-12));
        CHECK(m.macro_recall == doctest::Approx(base.macro_recall).epsilon(1e-12));
        CHECK(m.macro_f1 == doctest::Approx(base.macro_f1).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Matching

TEST_CASE("label similarity is token-set Jaccard without stop words") {
    CHECK(label_tokens("Delete MY account, and the data!") == std::vector<std::string>{"account", "data", "delete"});
    CHECK(label_similarity("Delete my account", "delete account") == doctest::Approx(1.0));
    CHECK(label_similarity("Delete account", "Delete data") == doctest::Approx(1.0 / 3));
    CHECK(label_similarity("the", "delete") == 0.0);
    CHECK(pair_similarity(extracted("Delete account"), truth("Delete my account")) == doctest::Approx(1.0));
    CHECK_FALSE(pair_similarity(extracted("Delete account", rights::Mechanism::email), truth("Delete my account")));
    CHECK_FALSE(pair_similarity(extracted("Delete account"), truth("Delete data")));
    CHECK(pair_similarity(extracted("Delete account"), truth("Delete data"), MatchRule{0.3}));
    auto same_target = pair_similarity(extracted("Erase", rights::Mechanism::email, "privacy@x.test"),
                                       truth("Delete data", rights::Mechanism::navigation, "privacy@x.test"));
    CHECK(same_target == doctest::Approx(1.0));
}

TEST_CASE("greedy can lose a pair that the optimum keeps") {
    // Row 0 likes both columns, row 1 only the first: greedy takes (0,0) and strands row 1.
    SimilarityMatrix sim{{0.9, 0.6}, {0.8, std::nullopt}};
    auto g = greedy_match(sim);
    CHECK(g.size() == 1);
    auto o = optimal_match(sim);
    CHECK(o.size() == 2);
    CHECK(score_of(o).total_similarity == doctest::Approx(1.4));
    CHECK(better(score_of(o), score_of(g)));
}

TEST_CASE("matching equals the exhaustive optimum on random sets") {
    std::mt19937 rng(2024);
    int greedy_short = 0;
    for (int i = 0; i < 200; ++i) {
        auto c = testing::random_match_case(rng);
        auto sim = similarity_matrix(c.extracted, c.gt);
        auto oracle = testing::brute_force_score(sim);
        auto chosen = match_rights(c.extracted, c.gt);
        check_injective(chosen);
        CHECK(score_of(chosen).cardinality == oracle.cardinality);
        CHECK(score_of(chosen).total_similarity == doctest::Approx(oracle.total_similarity).epsilon(1e-9));
        auto opt = optimal_match(sim);
        CHECK(score_of(opt).cardinality == oracle.cardinality);
        CHECK(score_of(opt).total_similarity == doctest::Approx(oracle.total_similarity).epsilon(1e-9));
        for (const auto& p : chosen) CHECK(sim[p.extracted][p.gt] == doctest::Approx(p.similarity));
        if (better(oracle, score_of(greedy_match(sim)))) ++greedy_short;
    }
    MESSAGE("greedy alone fell short on " << greedy_short << " of 200 cases");
}

TEST_CASE("match score is symmetric under input permutation") {
    std::mt19937 rng(5150);
    for (int i = 0; i < 60; ++i) {
        auto c = testing::random_match_case(rng);
        auto base = score_of(match_rights(c.extracted, c.gt));
        std::shuffle(c.extracted.begin(), c.extracted.end(), rng);
        std::shuffle(c.gt.begin(), c.gt.end(), rng);
        auto shuffled = score_of(match_rights(c.extracted, c.gt));
        CHECK(shuffled.cardinality == base.cardinality);
        CHECK(shuffled.total_similarity == doctest::Approx(base.total_similarity).epsilon(1e-9));
    }
}

// ---------------------------------------------------------------------------
// Corpus

TEST_CASE("corpus fixture evaluates to the expected per-site counts") {
    auto corpus = load_corpus(testing::fixture("eval/corpus14.json"));
    CHECK(corpus.size() == 185);
    std::vector<rights::RightsAnalysis> analyses;
    for (const auto& a : testing::read_json("eval/analyses14.json")) analyses.push_back(rights::analysis_from_json(a));
    auto reports = evaluate_extraction(corpus, analyses);
    REQUIRE(reports.size() == 14);

    struct Expected {
        const char* site;
        int labels, gt, tp;
    };
    const Expected expected[] = {{"spotify.com", 11, 13, 11}, {"airbnb.com", 4, 9, 4},      {"amazon.com", 10, 11, 10},
                                 {"facebook.com", 11, 11, 10}, {"google.com", 10, 13, 10},  {"linkedin.com", 13, 16, 13},
                                 {"netflix.com", 12, 15, 12},  {"nytimes.com", 11, 17, 11}, {"reddit.com", 11, 14, 10},
                                 {"target.com", 11, 16, 11},   {"walmart.com", 11, 12, 11}, {"webmd.com", 9, 14, 9},
                                 {"zoom.com", 10, 12, 10},     {"x.com", 11, 12, 10}};
    int fp = 0;
    for (const auto& e : expected) {
        auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.site == e.site; });
        REQUIRE(it != reports.end());
        CAPTURE(e.site);
        CHECK(it->n_labels == e.labels);
        CHECK(it->n_gt == e.gt);
        CHECK(it->tp == e.tp);
        fp += it->fp;
    }
    CHECK(fp == 3);

    auto without = evaluate_extraction(corpus, {});
    for (const auto& r : without) {
        CHECK(r.n_labels == 0);
        CHECK(r.recall == 0.0);
    }
}

TEST_CASE("corpus errors name the row") {
    auto row_of = [](const char* text) {
        try {
            corpus_from_json(nlohmann::json::parse(text));
        } catch (const CorpusError& e) {
            return e.row();
        }
        return size_t{999};
    };
    CHECK(row_of(R"({"site":"a"})") == 0);
    CHECK(row_of(R"([{"site":"a","label":"Delete","mechanism":"email","jurisdiction":"CCPA"},
                     {"site":"a","label":" delete ","mechanism":"link","jurisdiction":"CCPA"}])") == 2);
    CHECK(row_of(R"([{"site":"a","label":"Delete","mechanism":"fax","jurisdiction":"CCPA"}])") == 1);
    CHECK(row_of(R"([{"site":"a","mechanism":"email","jurisdiction":"CCPA"}])") == 1);
    testing::TempDir dir("corpus");
    CHECK_THROWS_AS(load_corpus(dir.path() / "missing.json"), CorpusError);
}

// ---------------------------------------------------------------------------
// Workflow

TEST_CASE("54-task fixture reproduces the reported workflow rows") {
    auto records = load_task_records(testing::fixture("eval/workflow_54.jsonl"));
    REQUIRE(records.size() == 54);
    auto m = aggregate_workflow(records);
    CHECK(m.overall.total == 54);
    CHECK(m.overall.success == 52);
    CHECK(m.overall.partial == 2);
    CHECK(m.overall.failure == 0);
    CHECK(std::abs(m.overall.success_rate * 100 - 96.3) <= 0.1);
    CHECK(m.overall.mean_steps >= 3.15);
    CHECK(m.overall.mean_steps <= 3.20);
    CHECK(m.overall.mean_steps == doctest::Approx(171.0 / 54));

    struct Row {
        TaskType type;
        int total, success, partial;
        const char* shown;
    };
    const Row rows[] = {{TaskType::access, 14, 14, 0, "4.1"},
                        {TaskType::delete_data, 14, 13, 1, "3.0"},
                        {TaskType::opt_out, 13, 13, 0, "2.4"},
                        {TaskType::correction, 13, 12, 1, "3.1"}};
    int step_total = 0;
    for (const auto& r : rows) {
        const auto& got = m.by_type.at(r.type);
        CHECK(got.total == r.total);
        CHECK(got.success == r.success);
        CHECK(got.partial == r.partial);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.1f", got.mean_steps);
        CHECK(std::string(buf) == r.shown);
        step_total += got.step_sum;
    }
    CHECK(step_total == m.overall.step_sum);
}

TEST_CASE("single successful record") {
    auto m = aggregate_workflow(parse_task_records(R"({"site":"a","task_type":"access","outcome":"success","steps":2})"));
    CHECK(m.overall.success_rate == 1.0);
    CHECK(m.overall.mean_steps == 2.0);
    CHECK(m.by_type.size() == 1);
}

TEST_CASE("bad task records report their line") {
    auto line_of = [](const std::string& text) {
        try {
            parse_task_records(text);
        } catch (const RecordError& e) {
            return e.line();
        }
        return size_t{0};
    };
    std::string ok = R"({"site":"a","task_type":"access","outcome":"success","steps":2})";
    CHECK(line_of(ok + "\n\n{oops") == 3);
    CHECK(line_of(ok + "\n" + R"({"site":"a","task_type":"fax","outcome":"success","steps":2})") == 2);
    CHECK(line_of(R"({"site":"a","task_type":"access","outcome":"won","steps":2})") == 1);
    CHECK(line_of(R"({"site":"a","task_type":"access","outcome":"success","steps":0})") == 1);
    CHECK(parse_task_records("\n  \n").empty());
    CHECK_THROWS_AS(aggregate_workflow({}), ContractViolation);
    CHECK(task_type_from_string("opt_out") == TaskType::opt_out);
    CHECK(display_name(TaskType::opt_out) == "Opt-out");
}

// ---------------------------------------------------------------------------
// Reports

TEST_CASE("extraction report json round trips and markdown mirrors the table layout") {
    auto m = aggregate_extraction(stated_sites());
    auto j = to_json(m);
    auto back = extraction_metrics_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(emit_report(back, Format::json) == emit_report(m, Format::json));

    auto md = emit_report(m, Format::markdown);
    CHECK(md.find("| Site | action labels | GT Rights | Precision | Recall |") != std::string::npos);
    CHECK(md.find("| Spotify | 11 | 13 | 1.000 | 0.846 |") != std::string::npos);
    CHECK(md.find("| **Mean** | **10.4** | **13.2** | **0.979** | **0.813** |") != std::string::npos);
    CHECK(md.find("Macro F1 (mean of per-site F1): 0.885") != std::string::npos);
    CHECK_THROWS_AS(emit_report(ExtractionMetrics{}, Format::markdown), ContractViolation);
}

TEST_CASE("workflow report json round trips and markdown mirrors the table layout") {
    auto m = aggregate_workflow(load_task_records(testing::fixture("eval/workflow_54.jsonl")));
    auto j = to_json(m);
    CHECK(to_json(workflow_metrics_from_json(j)) == j);
    auto md = emit_report(m, Format::markdown);
    CHECK(md.find("| Task Type | Total | Success | Partial | Failure | Mean Steps |") != std::string::npos);
    CHECK(md.find("| Opt-out | 13 | 13 | 0 | 0 | 2.4 |") != std::string::npos);
    CHECK(md.find("| **All** | 54 | 52 | 2 | 0 | 3.2 |") != std::string::npos);
    CHECK(md.find("96.3%") != std::string::npos);
    CHECK_THROWS_AS(emit_report(WorkflowMetrics{}, Format::json), ContractViolation);
}
