// SPDX-License-Identifier: Apache-2.0
// rightpath: analyze privacy policies, run evaluations, serve the API.

#include "rightpath/eval.hpp"
#include "rightpath/service.hpp"
#include "rightpath/text.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

namespace rp = rightpath;

namespace {

enum Exit {
    ok = 0,
    failure = 1,
    usage = 2,
    discovery_failed = 3,
    extraction_failed = 4,
    backend_failed = 5,
    bad_input = 6,
};

class CountingProvider : public rp::llm::Provider {
public:
    explicit CountingProvider(std::shared_ptr<rp::llm::Provider> inner) : inner_(std::move(inner)) {}
    rp::llm::ChatResponse send(const rp::llm::ChatRequest& request) override {
        ++calls_;
        return inner_->send(request);
    }
    bool native_json_mode() const override { return inner_->native_json_mode(); }
    std::string name() const override { return inner_->name(); }
    int calls() const { return calls_.load(); }

private:
    std::shared_ptr<rp::llm::Provider> inner_;
    std::atomic<int> calls_{0};
};

int report_error(const rp::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    const auto& code = e.code();
    if (code == "discovery_failed" || code.starts_with("fetch_")) return discovery_failed;
    if (code == "extraction_failed") return extraction_failed;
    if (code.starts_with("llm_")) return backend_failed;
    if (code == "corpus_invalid" || code == "task_record_invalid" || code == "config_invalid" ||
        code == "contract_violation")
        return bad_input;
    return failure;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw rp::ContractViolation("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw rp::ContractViolation(path + " is not JSON: " + e.what());
    }
}

rp::eval::Format parse_format(const std::string& s) {
    return s == "json" ? rp::eval::Format::json : rp::eval::Format::markdown;
}

struct AnalyzeArgs {
    std::string url;
    bool json = false;
    bool stats = false;
    std::string fixture_site;
    std::string record;
    std::string replay;
    std::string provider = "gemini";
    std::string model;
    std::string cache_dir = ".rightpath-cache";
    std::string fixed_time;
    bool no_llm_selection = false;
    bool with_context = false;
};

int run_analyze(const AnalyzeArgs& a) {
    rp::service::ServiceConfig config;
    config.provider = a.provider;
    config.model = a.model;
    config.cache_dir = a.cache_dir;
    config.fixture_root = a.fixture_site;
    config.llm_link_selection = !a.no_llm_selection;
    if (!a.record.empty()) {
        config.transcript_mode = "record";
        config.transcript_path = a.record;
    } else if (!a.replay.empty()) {
        config.transcript_mode = "replay";
        config.transcript_path = a.replay;
    }

    rp::Clock clock = rp::system_clock();
    if (!a.fixed_time.empty()) {
        auto at = rp::parse_utc(a.fixed_time);
        if (!at) throw rp::ContractViolation("--fixed-time must look like 2026-01-01T00:00:00Z");
        clock = rp::fixed_clock(*at);
    }

    // The counter sits outside the retry and transcript layers so it sees
    // exactly the calls the pipeline makes.
    auto counter = std::make_shared<CountingProvider>(rp::service::make_service_provider(config));
    auto rt = rp::service::make_runtime(config, clock, counter);
    auto result = rt.analyses->analyze(a.url);

    std::vector<rp::context::PolicyContext> contexts;
    if (a.with_context)
        for (const auto& r : result.analysis.rights)
            contexts.push_back(rp::context::generate_policy_context(r, result.document, *counter));

    if (a.json) {
        auto doc = rp::service::analysis_wire(result.analysis);
        if (a.with_context) {
            doc["contexts"] = nlohmann::json::array();
            for (const auto& c : contexts) doc["contexts"].push_back(rp::context::to_wire(c));
        }
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "Site: " << result.analysis.site << "\nPolicy: " << result.analysis.policy_url << "\n\n";
        if (result.analysis.rights.empty()) std::cout << "No actionable rights found.\n";
        int n = 1;
        for (const auto& r : result.analysis.rights)
            std::cout << n++ << ". " << r.label << " [" << rp::rights::to_string(r.mechanism) << ": " << r.action_value
                      << "]\n";
        for (const auto& c : contexts)
            std::cout << "\n[" << c.right_id << "]\n" << c.legal_reference << "\n\"" << c.policy_excerpt << "\"\n"
                      << rp::context::format_education(c.education) << "\n";
    }
    if (a.stats)
        std::cerr << "provider_calls=" << counter->calls() << " extractions=" << rt.analyses->extractions()
                  << " cache_hit=" << (result.cache_hit ? "true" : "false") << "\n";
    return ok;
}

int run_eval_extraction(const std::string& corpus_path, const std::string& analyses_path,
                        const std::string& stated_path, const std::string& format, double threshold) {
    std::vector<rp::eval::SiteExtractionReport> reports;
    if (!stated_path.empty()) {
        reports = rp::eval::stated_reports_from_json(read_json(stated_path));
    } else {
        auto corpus = rp::eval::load_corpus(corpus_path);
        auto j = read_json(analyses_path);
        std::vector<rp::rights::RightsAnalysis> analyses;
        if (j.is_array())
            for (const auto& a : j) analyses.push_back(rp::rights::analysis_from_json(a));
        else
            analyses.push_back(rp::rights::analysis_from_json(j));
        reports = rp::eval::evaluate_extraction(corpus, analyses, {threshold});
    }
    std::cout << rp::eval::emit_report(rp::eval::aggregate_extraction(reports), parse_format(format));
    return ok;
}

int run_eval_workflow(const std::string& records_path, const std::string& format) {
    auto records = rp::eval::load_task_records(records_path);
    std::cout << rp::eval::emit_report(rp::eval::aggregate_workflow(records), parse_format(format));
    return ok;
}

rp::service::Server* active_server = nullptr;

int run_serve(const std::string& config_path) {
    auto config = rp::service::load_config(config_path);
    auto rt = rp::service::make_runtime(config);
    rp::service::Server server(rt.api, config.cors_origins);
    active_server = &server;
    std::signal(SIGINT, [](int) {
        if (active_server) active_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (active_server) active_server->stop();
    });
    int port = server.bind(config.host, config.port);
    std::cerr << "listening on " << config.host << ":" << port << "\n";
    server.serve_bound();
    active_server = nullptr;
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Find, explain and act on the privacy rights in a website's policy."};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    AnalyzeArgs analyze;
    auto* cmd_analyze = app.add_subcommand("analyze", "Locate a site's privacy policy and extract its rights");
    cmd_analyze->add_option("url", analyze.url, "Site URL, e.g. https://example.com")->required();
    cmd_analyze->add_flag("--json", analyze.json, "Print the canonical analysis document");
    cmd_analyze->add_flag("--stats", analyze.stats, "Print provider call counts to stderr");
    cmd_analyze->add_option("--fixture-site", analyze.fixture_site, "Serve pages from <dir>/<host>/<path>")
        ->check(CLI::ExistingDirectory);
    auto* record = cmd_analyze->add_option("--record", analyze.record, "Record completions to a JSONL transcript");
    cmd_analyze->add_option("--replay", analyze.replay, "Answer completions from a JSONL transcript")
        ->excludes(record);
    cmd_analyze->add_option("--provider", analyze.provider, "gemini | openai | anthropic | scripted:<steps.json>")
        ->capture_default_str();
    cmd_analyze->add_option("--model", analyze.model, "Model id (provider default when empty)");
    cmd_analyze->add_option("--cache-dir", analyze.cache_dir, "Cache directory")->capture_default_str();
    cmd_analyze->add_option("--fixed-time", analyze.fixed_time, "Pin the clock, e.g. 2026-01-01T00:00:00Z");
    cmd_analyze->add_flag("--no-llm-selection", analyze.no_llm_selection, "Pick the policy link heuristically");
    cmd_analyze->add_flag("--with-context", analyze.with_context, "Also generate the policy context for each right");

    auto* cmd_eval = app.add_subcommand("eval", "Evaluation harness");
    cmd_eval->require_subcommand(1);
    std::string corpus, analyses, stated, records, format = "markdown";
    double threshold = 0.5;
    auto* ext = cmd_eval->add_subcommand("extraction", "Precision/recall of extracted rights against ground truth");
    auto* opt_corpus = ext->add_option("--corpus", corpus, "Ground-truth corpus (JSON array)")->check(CLI::ExistingFile);
    auto* opt_analyses =
        ext->add_option("--analyses", analyses, "Analysis document or array of them")->check(CLI::ExistingFile);
    auto* opt_stated =
        ext->add_option("--stated", stated, "Per-site stated counts and ratios (JSON array)")->check(CLI::ExistingFile);
    opt_corpus->needs(opt_analyses);
    opt_analyses->needs(opt_corpus);
    opt_stated->excludes(opt_corpus)->excludes(opt_analyses);
    ext->add_option("--threshold", threshold, "Label similarity threshold")->capture_default_str();
    ext->add_option("--format", format, "markdown | json")->check(CLI::IsMember({"markdown", "json"}));
    ext->callback([&] {
        if (corpus.empty() && stated.empty())
            throw CLI::RequiredError("--corpus and --analyses, or --stated");
    });

    auto* wf = cmd_eval->add_subcommand("workflow", "Outcome and step statistics from task records");
    wf->add_option("--records", records, "Task records (JSON lines)")->required()->check(CLI::ExistingFile);
    wf->add_option("--format", format, "markdown | json")->check(CLI::IsMember({"markdown", "json"}));

    std::string config_path;
    auto* cmd_serve = app.add_subcommand("serve", "Run the HTTP API");
    cmd_serve->add_option("--config", config_path, "key = value configuration file")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*cmd_analyze) return run_analyze(analyze);
        if (*ext) return run_eval_extraction(corpus, analyses, stated, format, threshold);
        if (*wf) return run_eval_workflow(records, format);
        if (*cmd_serve) return run_serve(config_path);
    } catch (const rp::Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    return usage;
}
