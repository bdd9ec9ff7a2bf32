// SPDX-License-Identifier: Apache-2.0
#include "rightpath/llm.hpp"

#include <fstream>

namespace rightpath::llm {

namespace {

nlohmann::json response_to_json(const ChatResponse& r) {
    return {{"text", r.text},
            {"model_id", r.model_id},
            {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}}};
}

ChatResponse response_from_json(const nlohmann::json& j) {
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.model_id = j.value("model_id", std::string{});
    if (j.contains("usage")) {
        r.usage.input_tokens = j.at("usage").value("input_tokens", 0L);
        r.usage.output_tokens = j.at("usage").value("output_tokens", 0L);
    }
    return r;
}

} // namespace

TranscriptStore::TranscriptStore(std::filesystem::path path) : path_(std::move(path)) {}

void TranscriptStore::load() {
    std::lock_guard lock(mutex_);
    entries_.clear();
    std::ifstream in(path_);
    if (!in) {
        if (std::filesystem::exists(path_)) throw LlmError(ErrorKind::store_corrupt, "cannot read " + path_.string());
        return;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            entries_[j.at("digest").get<std::string>()] = response_from_json(j.at("response"));
        } catch (const nlohmann::json::exception& e) {
            throw LlmError(ErrorKind::store_corrupt,
                           path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::optional<ChatResponse> TranscriptStore::find(const std::string& digest) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void TranscriptStore::append(const ChatRequest& request, const ChatResponse& response) {
    std::lock_guard lock(mutex_);
    auto digest = request_digest(request);
    entries_[digest] = response;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw LlmError(ErrorKind::store_corrupt, "cannot write " + path_.string());
    nlohmann::json line = {{"digest", digest}, {"request", to_json(request)}, {"response", response_to_json(response)}};
    out << line.dump() << '\n';
}

size_t TranscriptStore::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::shared_ptr<TranscriptStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

ChatResponse RecordingProvider::send(const ChatRequest& request) {
    auto response = complete(request, *inner_);
    store_->append(request, response);
    return response;
}

ReplayProvider::ReplayProvider(std::shared_ptr<TranscriptStore> store) : store_(std::move(store)) {}

ChatResponse ReplayProvider::send(const ChatRequest& request) {
    ++calls_;
    auto digest = request_digest(request);
    if (auto hit = store_->find(digest)) return *hit;
    throw LlmError(ErrorKind::replay_miss, "no transcript entry for request " + digest.substr(0, 16));
}

std::shared_ptr<Provider> record_replay(TranscriptMode mode, const std::filesystem::path& store,
                                        std::shared_ptr<Provider> live) {
    auto transcript = std::make_shared<TranscriptStore>(store);
    if (mode == TranscriptMode::replay) {
        if (!std::filesystem::exists(store)) throw LlmError(ErrorKind::store_corrupt, "transcript not found: " + store.string());
        transcript->load();
        return std::make_shared<ReplayProvider>(std::move(transcript));
    }
    if (!live) throw ContractViolation("record mode needs a live provider");
    transcript->load();
    return std::make_shared<RecordingProvider>(std::move(live), std::move(transcript));
}

} // namespace rightpath::llm
