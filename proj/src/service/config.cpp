// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include "rightpath/text.hpp"

#include <fstream>
#include <sstream>

namespace rightpath::service {

ConfigError::ConfigError(size_t line, const std::string& message)
    : Error("config_invalid", line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

long parse_number(size_t line, const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        long n = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return n;
    } catch (const std::exception&) {
        throw ConfigError(line, key + " must be an integer, got '" + value + "'");
    }
}

bool parse_bool(size_t line, const std::string& key, const std::string& value) {
    auto v = to_lower(value);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(line, key + " must be true or false, got '" + value + "'");
}

} // namespace

ServiceConfig parse_config(std::string_view text) {
    ServiceConfig c;
    size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        auto positive = [&](const char* what) {
            auto n = parse_number(line_no, key, value);
            if (n <= 0) throw ConfigError(line_no, std::string(what) + " must be positive");
            return n;
        };

        if (key == "listen") {
            auto colon = value.rfind(':');
            if (colon == std::string::npos) throw ConfigError(line_no, "listen must be host:port");
            c.host = value.substr(0, colon);
            c.port = static_cast<int>(parse_number(line_no, key, value.substr(colon + 1)));
            if (c.port < 0 || c.port > 65535) throw ConfigError(line_no, "port out of range");
        } else if (key == "provider") {
            c.provider = value;
        } else if (key == "model") {
            c.model = value;
        } else if (key == "base_url") {
            c.base_url = value;
        } else if (key == "transcript_mode") {
            if (!value.empty() && value != "record" && value != "replay")
                throw ConfigError(line_no, "transcript_mode must be record or replay");
            c.transcript_mode = value;
        } else if (key == "transcript_path") {
            c.transcript_path = value;
        } else if (key == "cache_dir") {
            c.cache_dir = value;
        } else if (key == "cache_ttl_hours") {
            c.cache_ttl = std::chrono::hours(positive("cache TTL"));
        } else if (key == "session_ttl_hours") {
            c.session_ttl = std::chrono::hours(positive("session TTL"));
        } else if (key == "node_budget") {
            c.node_budget = static_cast<size_t>(positive("node budget"));
        } else if (key == "retry_attempts") {
            c.retry_attempts = static_cast<int>(positive("retry attempts"));
        } else if (key == "extraction_attempts") {
            c.extraction_attempts = static_cast<int>(positive("extraction attempts"));
        } else if (key == "max_in_flight") {
            c.max_in_flight = static_cast<int>(positive("max in flight"));
        } else if (key == "llm_link_selection") {
            c.llm_link_selection = parse_bool(line_no, key, value);
        } else if (key == "cors_origins") {
            c.cors_origins.clear();
            for (const auto& o : split(value, ','))
                if (auto t = trim(o); !t.empty()) c.cors_origins.push_back(t);
        } else if (key == "fixture_root") {
            c.fixture_root = value;
        } else {
            throw ConfigError(line_no, "unknown key '" + key + "'");
        }
    }
    if (!c.transcript_mode.empty() && c.transcript_path.empty())
        throw ConfigError(0, "transcript_mode needs transcript_path");
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto config = parse_config(ss.str());

    std::error_code ec;
    std::filesystem::create_directories(config.cache_dir, ec);
    auto probe = config.cache_dir / ".write-probe";
    std::ofstream out(probe);
    if (ec || !out) throw ConfigError(0, "cache directory not writable: " + config.cache_dir.string());
    out.close();
    std::filesystem::remove(probe, ec);
    return config;
}

RetryingProvider::RetryingProvider(std::shared_ptr<llm::Provider> inner, llm::RetryPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {}

llm::ChatResponse RetryingProvider::send(const llm::ChatRequest& request) {
    try {
        return llm::complete_with_retries(request, *inner_, policy_).response;
    } catch (const llm::AttemptsExhausted& e) {
        throw llm::LlmError(e.last_kind(), e.what());
    }
}

std::shared_ptr<llm::Provider> make_service_provider(const ServiceConfig& config) {
    std::shared_ptr<llm::Provider> provider;
    bool replay = config.transcript_mode == "replay";
    if (!replay) {
        if (config.provider.starts_with("scripted:"))
            provider = std::make_shared<llm::ScriptedProvider>(
                llm::ScriptedProvider::load_steps(config.provider.substr(std::string("scripted:").size())));
        else
            provider = llm::make_provider(config.provider, config.model, config.base_url);
    }
    if (!config.transcript_mode.empty())
        provider = llm::record_replay(replay ? llm::TranscriptMode::replay : llm::TranscriptMode::record,
                                      config.transcript_path, provider);
    llm::RetryPolicy policy;
    policy.max_attempts = config.retry_attempts;
    provider = std::make_shared<RetryingProvider>(provider, policy);
    return std::make_shared<llm::ConcurrencyLimitedProvider>(provider, config.max_in_flight);
}

} // namespace rightpath::service
