// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/error.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rightpath::llm {

enum class Role { system, user, assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct Message {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
    std::vector<Message> messages;
    bool expects_json = false;
    double temperature = 0.0;
    int max_output = 4096;

    /// Throws ContractViolation unless there is at least one message, a
    /// system message appears only first, and temperature is in [0, 2].
    void validate() const;
};

struct Usage {
    long input_tokens = 0;
    long output_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    Usage usage;
};

enum class ErrorKind { transport, auth, rate_limit, timeout, bad_response, replay_miss, store_corrupt };

std::string to_string(ErrorKind kind);

class LlmError : public Error {
public:
    LlmError(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// One completion backend. Adapters translate a ChatRequest to the wire
/// protocol of one provider and return the provider's text unchanged.
class Provider {
public:
    virtual ~Provider() = default;

    virtual ChatResponse send(const ChatRequest& request) = 0;

    /// Whether `send` already honors `expects_json` natively. When false,
    /// `complete` appends a strict-JSON instruction before sending.
    virtual bool native_json_mode() const { return false; }

    virtual std::string name() const = 0;
};

/// Instruction appended to the last user message for providers without a
/// native JSON mode.
extern const char* const strict_json_instruction;

ChatResponse complete(const ChatRequest& request, Provider& provider);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    std::chrono::milliseconds max_backoff{8000};
    double multiplier = 2.0;
    double jitter = 0.25; // fraction of the nominal delay
    std::function<void(std::chrono::milliseconds)> sleep; // defaults to std::this_thread::sleep_for
    unsigned seed = 0x5eed;
};

struct RetriedResponse {
    ChatResponse response;
    int attempts = 0;
};

class AttemptsExhausted : public Error {
public:
    AttemptsExhausted(int attempts, const LlmError& last);
    int attempts() const noexcept { return attempts_; }
    ErrorKind last_kind() const noexcept { return last_kind_; }

private:
    int attempts_;
    ErrorKind last_kind_;
};

bool is_retryable(ErrorKind kind);

/// Retries transport, timeout and rate-limit failures with exponential
/// backoff and jitter. Any other error is rethrown immediately.
RetriedResponse complete_with_retries(const ChatRequest& request, Provider& provider, const RetryPolicy& policy);

/// Key used by the transcript store and the default mock lookup: SHA-256
/// over the canonical JSON of messages plus expects_json.
std::string request_digest(const ChatRequest& request);

nlohmann::json to_json(const ChatRequest& request);

/// Fixture-backed provider: responses are looked up by key, the key being
/// computed from the request (request_digest unless overridden).
class MockProvider : public Provider {
public:
    using KeyFn = std::function<std::string(const ChatRequest&)>;

    explicit MockProvider(std::map<std::string, std::string> fixtures, KeyFn key = nullptr,
                          std::string model_id = "mock");

    ChatResponse send(const ChatRequest& request) override;
    bool native_json_mode() const override { return true; }
    std::string name() const override { return "mock"; }
    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> fixtures_;
    KeyFn key_;
    std::string model_id_;
    std::atomic<int> calls_{0};
};

/// Serves a fixed sequence of replies in order; each step is either text or
/// an error. Running past the end raises replay_miss.
class ScriptedProvider : public Provider {
public:
    struct Step {
        std::string text;
        std::optional<ErrorKind> error;
    };

    explicit ScriptedProvider(std::vector<Step> steps, std::string model_id = "scripted");
    static std::vector<Step> texts(const std::vector<std::string>& texts);
    /// JSON array of strings or of {"text": ...} / {"error": "<kind>"} objects.
    static std::vector<Step> load_steps(const std::filesystem::path& path);

    ChatResponse send(const ChatRequest& request) override;
    bool native_json_mode() const override { return true; }
    std::string name() const override { return "scripted"; }

    int calls() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mutex_;
    std::deque<Step> steps_;
    std::vector<ChatRequest> requests_;
    std::string model_id_;
};

enum class TranscriptMode { record, replay };

/// JSON-lines transcript: one {"digest", "request", "response"} object per line.
class TranscriptStore {
public:
    explicit TranscriptStore(std::filesystem::path path);

    /// Throws LlmError(store_corrupt) on unreadable lines.
    void load();
    std::optional<ChatResponse> find(const std::string& digest) const;
    void append(const ChatRequest& request, const ChatResponse& response);
    size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, ChatResponse> entries_;
};

class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::shared_ptr<TranscriptStore> store);
    ChatResponse send(const ChatRequest& request) override;
    bool native_json_mode() const override { return true; }
    std::string name() const override { return "record:" + inner_->name(); }

private:
    std::shared_ptr<Provider> inner_;
    std::shared_ptr<TranscriptStore> store_;
};

class ReplayProvider : public Provider {
public:
    explicit ReplayProvider(std::shared_ptr<TranscriptStore> store);
    ChatResponse send(const ChatRequest& request) override;
    bool native_json_mode() const override { return true; }
    std::string name() const override { return "replay"; }
    int calls() const { return calls_.load(); }

private:
    std::shared_ptr<TranscriptStore> store_;
    std::atomic<int> calls_{0};
};

/// Record mode wraps `live` and persists every exchange; replay mode serves
/// stored responses and ignores `live`.
std::shared_ptr<Provider> record_replay(TranscriptMode mode, const std::filesystem::path& store,
                                        std::shared_ptr<Provider> live = nullptr);

/// Caps concurrent in-flight requests to a shared provider.
class ConcurrencyLimitedProvider : public Provider {
public:
    ConcurrencyLimitedProvider(std::shared_ptr<Provider> inner, int max_in_flight);
    ChatResponse send(const ChatRequest& request) override;
    bool native_json_mode() const override { return inner_->native_json_mode(); }
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<Provider> inner_;
    int max_in_flight_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

struct HttpProviderConfig {
    std::string api_key;
    std::string model;
    std::string base_url; // empty selects the provider's public endpoint
    std::chrono::seconds timeout{60};
};

std::shared_ptr<Provider> make_openai_provider(HttpProviderConfig config);
std::shared_ptr<Provider> make_anthropic_provider(HttpProviderConfig config);
std::shared_ptr<Provider> make_gemini_provider(HttpProviderConfig config);

/// Environment variable holding the credential for `provider`
/// ("openai" -> OPENAI_API_KEY, "anthropic" -> ANTHROPIC_API_KEY,
/// "gemini" -> GEMINI_API_KEY).
std::string credential_variable(const std::string& provider);

/// Builds a live adapter from its name, reading the key from the environment.
/// Throws LlmError(auth) when the key is absent.
std::shared_ptr<Provider> make_provider(const std::string& provider, const std::string& model,
                                        const std::string& base_url = {});

std::string default_model(const std::string& provider);

} // namespace rightpath::llm
