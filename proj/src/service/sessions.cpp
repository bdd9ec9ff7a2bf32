// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include "rightpath/text.hpp"

#include <fstream>
#include <random>

namespace rightpath::service {

namespace {

std::string random_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 24; ++i) id.push_back(hex[rng() % 16]);
    return id;
}

bool safe_id(const std::string& id) { return !id.empty() && id.size() <= 64 && is_slug(id); }

} // namespace

SessionStore::SessionStore(std::filesystem::path dir, std::chrono::seconds ttl, Clock clock, IdGenerator ids)
    : dir_(std::move(dir)), ttl_(ttl), clock_(std::move(clock)), ids_(std::move(ids)) {
    if (ttl_.count() <= 0) throw ContractViolation("session ttl must be positive");
    if (!ids_) ids_ = random_id;
    std::filesystem::create_directories(dir_);
}

std::string SessionStore::next_id() {
    auto id = ids_();
    if (!safe_id(id)) throw ContractViolation("session id generator produced an unsafe id");
    return id;
}

void SessionStore::persist(const guidance::GuidanceSession& session) const {
    auto path = dir_ / (session.id + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << guidance::to_storage_json(session).dump(2);
    }
    std::filesystem::rename(tmp, path);
}

void SessionStore::expire_if_idle(guidance::GuidanceSession& session) const {
    if (session.status != guidance::SessionStatus::active) return;
    auto at = parse_utc(session.updated_at);
    if (at && clock_() - *at >= ttl_) {
        guidance::close_session(session, guidance::SessionStatus::abandoned);
        persist(session);
    }
}

void SessionStore::insert(guidance::GuidanceSession session) {
    if (!safe_id(session.id)) throw ContractViolation("unsafe session id");
    session.updated_at = format_utc(clock_());
    auto s = std::make_shared<Slot>();
    s->session = std::move(session);
    persist(s->session);
    std::lock_guard lock(mutex_);
    slots_[s->session.id] = s;
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) {
    if (!safe_id(id)) return nullptr;
    std::lock_guard lock(mutex_);
    if (auto it = slots_.find(id); it != slots_.end()) return it->second;
    std::ifstream in(dir_ / (id + ".json"));
    if (!in) return nullptr;
    auto s = std::make_shared<Slot>();
    try {
        s->session = guidance::session_from_storage_json(nlohmann::json::parse(in));
    } catch (const std::exception&) {
        return nullptr;
    }
    if (s->session.id != id) return nullptr;
    slots_[id] = s;
    return s;
}

bool SessionStore::with_session(const std::string& id, const std::function<void(guidance::GuidanceSession&)>& fn) {
    auto s = slot(id);
    if (!s) return false;
    std::lock_guard lock(s->mutex);
    expire_if_idle(s->session);
    auto copy = s->session;
    fn(copy);
    copy.updated_at = format_utc(clock_());
    persist(copy);
    s->session = std::move(copy);
    return true;
}

std::optional<guidance::GuidanceSession> SessionStore::get(const std::string& id) {
    auto s = slot(id);
    if (!s) return std::nullopt;
    std::lock_guard lock(s->mutex);
    expire_if_idle(s->session);
    return s->session;
}

} // namespace rightpath::service
