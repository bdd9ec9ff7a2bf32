// SPDX-License-Identifier: Apache-2.0
#include "rightpath/llm.hpp"

#include "rightpath/url.hpp"

#include <httplib.h>

#include <cstdlib>

namespace rightpath::llm {

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path prefix without trailing '/'
};

Endpoint split_base(const std::string& base_url) {
    auto url = parse_url(base_url);
    if (!url) throw ContractViolation("bad provider base url: " + base_url);
    Endpoint ep;
    ep.origin = url->scheme + "://" + url->host + (url->port ? ":" + std::to_string(*url->port) : "");
    ep.prefix = url->path;
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    return ep;
}

ErrorKind kind_for_status(int status) {
    if (status == 401 || status == 403) return ErrorKind::auth;
    if (status == 429) return ErrorKind::rate_limit;
    if (status == 408 || status == 504) return ErrorKind::timeout;
    if (status >= 500) return ErrorKind::transport;
    return ErrorKind::bad_response;
}

nlohmann::json post_json(const HttpProviderConfig& config, const std::string& default_base, const std::string& path,
                         const httplib::Headers& headers, const nlohmann::json& body) {
    auto ep = split_base(config.base_url.empty() ? default_base : config.base_url);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);
    client.set_write_timeout(config.timeout);

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
    if (!result) {
        auto err = result.error();
        auto elapsed = std::chrono::steady_clock::now() - started;
        bool timed_out = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && elapsed >= config.timeout - std::chrono::milliseconds(100));
        throw LlmError(timed_out ? ErrorKind::timeout : ErrorKind::transport, "request failed: " + httplib::to_string(err));
    }
    if (result->status < 200 || result->status >= 300)
        throw LlmError(kind_for_status(result->status),
                       "provider returned HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 300));
    try {
        return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
        throw LlmError(ErrorKind::bad_response, std::string("provider body is not JSON: ") + e.what());
    }
}

class OpenAiProvider : public Provider {
public:
    explicit OpenAiProvider(HttpProviderConfig config) : config_(std::move(config)) {}

    ChatResponse send(const ChatRequest& request) override {
        auto messages = nlohmann::json::array();
        for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        nlohmann::json body = {{"model", config_.model},
                               {"messages", messages},
                               {"temperature", request.temperature},
                               {"max_tokens", request.max_output}};
        if (request.expects_json) body["response_format"] = {{"type", "json_object"}};
        auto reply = post_json(config_, "https://api.openai.com", "/v1/chat/completions",
                               {{"Authorization", "Bearer " + config_.api_key}}, body);
        try {
            ChatResponse r;
            r.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            r.model_id = reply.value("model", config_.model);
            if (reply.contains("usage")) {
                r.usage.input_tokens = reply["usage"].value("prompt_tokens", 0L);
                r.usage.output_tokens = reply["usage"].value("completion_tokens", 0L);
            }
            return r;
        } catch (const nlohmann::json::exception& e) {
            throw LlmError(ErrorKind::bad_response, std::string("unexpected openai body: ") + e.what());
        }
    }

    bool native_json_mode() const override { return true; }
    std::string name() const override { return "openai"; }

private:
    HttpProviderConfig config_;
};

class AnthropicProvider : public Provider {
public:
    explicit AnthropicProvider(HttpProviderConfig config) : config_(std::move(config)) {}

    ChatResponse send(const ChatRequest& request) override {
        nlohmann::json body = {{"model", config_.model},
                               {"max_tokens", request.max_output},
                               {"temperature", std::min(request.temperature, 1.0)}};
        auto messages = nlohmann::json::array();
        for (const auto& m : request.messages) {
            if (m.role == Role::system)
                body["system"] = m.content;
            else
                messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        body["messages"] = messages;
        auto reply = post_json(config_, "https://api.anthropic.com", "/v1/messages",
                               {{"x-api-key", config_.api_key}, {"anthropic-version", "2023-06-01"}}, body);
        try {
            ChatResponse r;
            for (const auto& block : reply.at("content"))
                if (block.value("type", "") == "text") r.text += block.at("text").get<std::string>();
            r.model_id = reply.value("model", config_.model);
            if (reply.contains("usage")) {
                r.usage.input_tokens = reply["usage"].value("input_tokens", 0L);
                r.usage.output_tokens = reply["usage"].value("output_tokens", 0L);
            }
            return r;
        } catch (const nlohmann::json::exception& e) {
            throw LlmError(ErrorKind::bad_response, std::string("unexpected anthropic body: ") + e.what());
        }
    }

    std::string name() const override { return "anthropic"; }

private:
    HttpProviderConfig config_;
};

class GeminiProvider : public Provider {
public:
    explicit GeminiProvider(HttpProviderConfig config) : config_(std::move(config)) {}

    ChatResponse send(const ChatRequest& request) override {
        nlohmann::json body;
        auto contents = nlohmann::json::array();
        for (const auto& m : request.messages) {
            if (m.role == Role::system)
                body["systemInstruction"] = {{"parts", {{{"text", m.content}}}}};
            else
                contents.push_back({{"role", m.role == Role::assistant ? "model" : "user"},
                                    {"parts", {{{"text", m.content}}}}});
        }
        body["contents"] = contents;
        body["generationConfig"] = {{"temperature", request.temperature}, {"maxOutputTokens", request.max_output}};
        if (request.expects_json) body["generationConfig"]["responseMimeType"] = "application/json";
        auto reply = post_json(config_, "https://generativelanguage.googleapis.com",
                               "/v1beta/models/" + config_.model + ":generateContent",
                               {{"x-goog-api-key", config_.api_key}}, body);
        try {
            ChatResponse r;
            for (const auto& part : reply.at("candidates").at(0).at("content").at("parts"))
                if (part.contains("text")) r.text += part.at("text").get<std::string>();
            r.model_id = reply.value("modelVersion", config_.model);
            if (reply.contains("usageMetadata")) {
                r.usage.input_tokens = reply["usageMetadata"].value("promptTokenCount", 0L);
                r.usage.output_tokens = reply["usageMetadata"].value("candidatesTokenCount", 0L);
            }
            return r;
        } catch (const nlohmann::json::exception& e) {
            throw LlmError(ErrorKind::bad_response, std::string("unexpected gemini body: ") + e.what());
        }
    }

    bool native_json_mode() const override { return true; }
    std::string name() const override { return "gemini"; }

private:
    HttpProviderConfig config_;
};

} // namespace

std::shared_ptr<Provider> make_openai_provider(HttpProviderConfig config) {
    return std::make_shared<OpenAiProvider>(std::move(config));
}

std::shared_ptr<Provider> make_anthropic_provider(HttpProviderConfig config) {
    return std::make_shared<AnthropicProvider>(std::move(config));
}

std::shared_ptr<Provider> make_gemini_provider(HttpProviderConfig config) {
    return std::make_shared<GeminiProvider>(std::move(config));
}

std::string credential_variable(const std::string& provider) {
    if (provider == "openai") return "OPENAI_API_KEY";
    if (provider == "anthropic") return "ANTHROPIC_API_KEY";
    if (provider == "gemini") return "GEMINI_API_KEY";
    throw ContractViolation("unknown provider: " + provider);
}

std::string default_model(const std::string& provider) {
    if (provider == "openai") return "gpt-4o";
    if (provider == "anthropic") return "claude-sonnet-4-20250514";
    if (provider == "gemini") return "gemini-3-flash-preview";
    throw ContractViolation("unknown provider: " + provider);
}

std::shared_ptr<Provider> make_provider(const std::string& provider, const std::string& model,
                                        const std::string& base_url) {
    auto var = credential_variable(provider);
    const char* key = std::getenv(var.c_str());
    if (key == nullptr || *key == '\0') throw LlmError(ErrorKind::auth, var + " is not set");
    HttpProviderConfig config{key, model.empty() ? default_model(provider) : model, base_url};
    if (provider == "openai") return make_openai_provider(std::move(config));
    if (provider == "anthropic") return make_anthropic_provider(std::move(config));
    return make_gemini_provider(std::move(config));
}

} // namespace rightpath::llm
