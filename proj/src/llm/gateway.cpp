// SPDX-License-Identifier: Apache-2.0
#include "rightpath/llm.hpp"

#include "rightpath/text.hpp"


#include <algorithm>
#include <fstream>
#include <thread>

namespace rightpath::llm {

const char* const strict_json_instruction =
    "Respond with a single valid JSON value only. Do not wrap it in markdown and do not add commentary.";

std::string to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ContractViolation("unknown message role: " + s);
}

std::string to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::transport: return "transport";
    case ErrorKind::auth: return "auth";
    case ErrorKind::rate_limit: return "rate_limit";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::bad_response: return "bad_response";
    case ErrorKind::replay_miss: return "replay_miss";
    case ErrorKind::store_corrupt: return "store_corrupt";
    }
    return "transport";
}

namespace {

ErrorKind error_kind_from_string(const std::string& s) {
    for (auto k : {ErrorKind::transport, ErrorKind::auth, ErrorKind::rate_limit, ErrorKind::timeout,
                   ErrorKind::bad_response, ErrorKind::replay_miss, ErrorKind::store_corrupt})
        if (to_string(k) == s) return k;
    throw ContractViolation("unknown llm error kind: " + s);
}

} // namespace

LlmError::LlmError(ErrorKind kind, const std::string& message)
    : Error("llm_" + to_string(kind), message), kind_(kind) {}

void ChatRequest::validate() const {
    if (messages.empty()) throw ContractViolation("chat request has no messages");
    for (size_t i = 1; i < messages.size(); ++i)
        if (messages[i].role == Role::system) throw ContractViolation("system message must come first");
    if (temperature < 0.0 || temperature > 2.0) throw ContractViolation("temperature outside [0, 2]");
    if (max_output <= 0) throw ContractViolation("max_output must be positive");
}

ChatResponse complete(const ChatRequest& request, Provider& provider) {
    request.validate();
    if (!request.expects_json || provider.native_json_mode()) return provider.send(request);

    ChatRequest augmented = request;
    auto last_user = std::find_if(augmented.messages.rbegin(), augmented.messages.rend(),
                                  [](const Message& m) { return m.role == Role::user; });
    if (last_user != augmented.messages.rend())
        last_user->content += std::string("\n\n") + strict_json_instruction;
    else
        augmented.messages.push_back({Role::user, strict_json_instruction});
    return provider.send(augmented);
}

bool is_retryable(ErrorKind kind) {
    return kind == ErrorKind::transport || kind == ErrorKind::timeout || kind == ErrorKind::rate_limit;
}

AttemptsExhausted::AttemptsExhausted(int attempts, const LlmError& last)
    : Error("llm_attempts_exhausted", "gave up after " + std::to_string(attempts) + " attempts: " + last.what()),
      attempts_(attempts), last_kind_(last.kind()) {}

RetriedResponse complete_with_retries(const ChatRequest& request, Provider& provider, const RetryPolicy& policy) {
    if (policy.max_attempts < 1) throw ContractViolation("max_attempts must be at least 1");
    std::mt19937 rng(policy.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto nominal = static_cast<double>(policy.initial_backoff.count());

    for (int attempt = 1;; ++attempt) {
        try {
            return {complete(request, provider), attempt};
        } catch (const LlmError& e) {
            if (!is_retryable(e.kind())) throw;
            if (attempt >= policy.max_attempts) throw AttemptsExhausted(attempt, e);
        }
        auto capped = std::min(nominal, static_cast<double>(policy.max_backoff.count()));
        auto delay = std::chrono::milliseconds(static_cast<long>(std::max(0.0, capped * (1.0 + policy.jitter * unit(rng)))));
        if (policy.sleep)
            policy.sleep(delay);
        else
            std::this_thread::sleep_for(delay);
        nominal *= policy.multiplier;
    }
}

nlohmann::json to_json(const ChatRequest& request) {
    auto messages = nlohmann::json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {{"messages", messages}, {"expects_json", request.expects_json}};
}

std::string request_digest(const ChatRequest& request) { return sha256_hex(to_json(request).dump()); }

MockProvider::MockProvider(std::map<std::string, std::string> fixtures, KeyFn key, std::string model_id)
    : fixtures_(std::move(fixtures)), key_(std::move(key)), model_id_(std::move(model_id)) {
    if (!key_) key_ = [](const ChatRequest& r) { return request_digest(r); };
}

ChatResponse MockProvider::send(const ChatRequest& request) {
    ++calls_;
    auto key = key_(request);
    auto it = fixtures_.find(key);
    if (it == fixtures_.end()) throw LlmError(ErrorKind::replay_miss, "no mock fixture for key " + key);
    return {it->second, model_id_, {}};
}

ScriptedProvider::ScriptedProvider(std::vector<Step> steps, std::string model_id)
    : steps_(steps.begin(), steps.end()), model_id_(std::move(model_id)) {}

std::vector<ScriptedProvider::Step> ScriptedProvider::texts(const std::vector<std::string>& texts) {
    std::vector<Step> steps;
    for (const auto& t : texts) steps.push_back({t, std::nullopt});
    return steps;
}

std::vector<ScriptedProvider::Step> ScriptedProvider::load_steps(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LlmError(ErrorKind::store_corrupt, "cannot read script " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LlmError(ErrorKind::store_corrupt, "script is not JSON: " + std::string(e.what()));
    }
    if (!doc.is_array()) throw LlmError(ErrorKind::store_corrupt, "script must be a JSON array");
    std::vector<Step> steps;
    for (const auto& item : doc) {
        if (item.is_string())
            steps.push_back({item.get<std::string>(), std::nullopt});
        else if (item.is_object() && item.contains("error"))
            steps.push_back({"", error_kind_from_string(item.at("error").get<std::string>())});
        else if (item.is_object() && item.contains("text"))
            steps.push_back({item.at("text").get<std::string>(), std::nullopt});
        else
            throw LlmError(ErrorKind::store_corrupt, "bad script step: " + item.dump());
    }
    return steps;
}

ChatResponse ScriptedProvider::send(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (steps_.empty()) throw LlmError(ErrorKind::replay_miss, "script exhausted");
    auto step = std::move(steps_.front());
    steps_.pop_front();
    if (step.error) throw LlmError(*step.error, "scripted " + to_string(*step.error) + " error");
    return {std::move(step.text), model_id_, {}};
}

int ScriptedProvider::calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(requests_.size());
}

std::vector<ChatRequest> ScriptedProvider::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

ConcurrencyLimitedProvider::ConcurrencyLimitedProvider(std::shared_ptr<Provider> inner, int max_in_flight)
    : inner_(std::move(inner)), max_in_flight_(std::max(1, max_in_flight)) {}

ChatResponse ConcurrencyLimitedProvider::send(const ChatRequest& request) {
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
        ++in_flight_;
    }
    struct Release {
        ConcurrencyLimitedProvider* self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->in_flight_;
            }
            self->cv_.notify_one();
        }
    } release{this};
    return complete(request, *inner_);
}

} // namespace rightpath::llm
