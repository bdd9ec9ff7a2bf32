// SPDX-License-Identifier: Apache-2.0
#include "rightpath/discovery.hpp"

#include "rightpath/url.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

namespace rightpath::discovery {

std::string to_string(FetchErrorKind kind) {
    switch (kind) {
    case FetchErrorKind::bad_url: return "bad_url";
    case FetchErrorKind::network: return "network";
    case FetchErrorKind::http_status: return "http_status";
    case FetchErrorKind::content_type: return "content_type";
    case FetchErrorKind::timeout: return "timeout";
    case FetchErrorKind::redirect_limit: return "redirect_limit";
    }
    return "network";
}

FetchError::FetchError(FetchErrorKind kind, std::string url, const std::string& message, int status)
    : Error("fetch_" + to_string(kind), message), kind_(kind), url_(std::move(url)), status_(status) {}

namespace {

bool is_redirect(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

bool html_content_type(std::string_view content_type) {
    if (content_type.empty()) return true;
    auto ct = to_lower(content_type);
    return ct.find("text/html") != std::string::npos || ct.find("application/xhtml+xml") != std::string::npos;
}

struct Hop {
    int status = 0;
    std::string location;
    std::string content_type;
    std::string body;
    bool truncated = false;
};

} // namespace

RawPage fetch_page(const std::string& url, const FetchLimits& limits, const PageFetcher& fetcher) {
    auto parsed = parse_url(url);
    if (!parsed || !parsed->is_http()) throw FetchError(FetchErrorKind::bad_url, url, "not an http(s) url: " + url);
    return fetcher.fetch(parsed->without_fragment(), limits);
}

RawPage fetch_page(const std::string& url, const FetchLimits& limits) { return fetch_page(url, limits, HttpFetcher{}); }

RawPage HttpFetcher::fetch(const std::string& start_url, const FetchLimits& limits) const {
    auto current = parse_url(start_url);
    if (!current || !current->is_http())
        throw FetchError(FetchErrorKind::bad_url, start_url, "not an http(s) url: " + start_url);

    for (int redirects = 0;; ++redirects) {
        auto origin = current->scheme + "://" + current->host + (current->port ? ":" + std::to_string(*current->port) : "");
        httplib::Client client(origin);
        client.set_follow_location(false);
        client.set_connection_timeout(limits.timeout);
        client.set_read_timeout(limits.timeout);
        client.set_keep_alive(false);

        auto target = current->path + (current->has_query ? "?" + current->query : "");
        httplib::Headers headers{{"User-Agent", limits.user_agent}, {"Accept", "text/html,application/xhtml+xml"}};

        Hop hop;
        auto started = std::chrono::steady_clock::now();
        auto result = client.Get(
            target, headers,
            [&](const httplib::Response& response) {
                hop.status = response.status;
                hop.location = response.get_header_value("Location");
                hop.content_type = response.get_header_value("Content-Type");
                return true;
            },
            [&](const char* data, size_t len) {
                auto room = limits.max_bytes - hop.body.size();
                if (len > room) {
                    hop.body.append(data, room);
                    hop.truncated = true;
                    return false;
                }
                hop.body.append(data, len);
                return true;
            });

        if (!result && !(result.error() == httplib::Error::Canceled && hop.truncated)) {
            auto err = result.error();
            auto elapsed = std::chrono::steady_clock::now() - started;
            bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= limits.timeout - std::chrono::milliseconds(50));
            throw FetchError(timed_out ? FetchErrorKind::timeout : FetchErrorKind::network, current->str(),
                             "fetch failed for " + current->str() + ": " + httplib::to_string(err));
        }

        if (is_redirect(hop.status)) {
            if (redirects >= limits.max_redirects)
                throw FetchError(FetchErrorKind::redirect_limit, start_url,
                                 "more than " + std::to_string(limits.max_redirects) + " redirects from " + start_url,
                                 hop.status);
            auto next = resolve_url(*current, hop.location);
            if (hop.location.empty() || !next || !next->is_http())
                throw FetchError(FetchErrorKind::network, current->str(), "redirect without usable Location", hop.status);
            current = parse_url(next->without_fragment());
            continue;
        }
        if (hop.status < 200 || hop.status >= 300)
            throw FetchError(FetchErrorKind::http_status, current->str(),
                             "HTTP " + std::to_string(hop.status) + " for " + current->str(), hop.status);
        if (!html_content_type(hop.content_type))
            throw FetchError(FetchErrorKind::content_type, current->str(), "not HTML: " + hop.content_type, hop.status);

        return {hop.status, current->str(), std::move(hop.body), hop.content_type, hop.truncated};
    }
}

DirectoryFetcher::DirectoryFetcher(std::filesystem::path root) : root_(std::move(root)) {}

RawPage DirectoryFetcher::fetch(const std::string& start_url, const FetchLimits& limits) const {
    namespace fs = std::filesystem;
    auto current = parse_url(start_url);
    if (!current || !current->is_http())
        throw FetchError(FetchErrorKind::bad_url, start_url, "not an http(s) url: " + start_url);

    auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };

    for (int redirects = 0;; ++redirects) {
        auto host_dir = root_ / current->host;
        if (!fs::is_directory(host_dir))
            throw FetchError(FetchErrorKind::network, current->str(), "unknown host: " + current->host);

        auto rel = current->path;
        while (!rel.empty() && rel.front() == '/') rel.erase(0, 1);
        if (rel.find("..") != std::string::npos)
            throw FetchError(FetchErrorKind::http_status, current->str(), "HTTP 404 for " + current->str(), 404);
        fs::path base = host_dir / rel;
        std::string trimmed = rel;
        while (!trimmed.empty() && trimmed.back() == '/') trimmed.pop_back();

        fs::path redirect_file = trimmed.empty() ? host_dir / "index.redirect" : host_dir / (trimmed + ".redirect");
        if (fs::is_regular_file(redirect_file)) {
            if (redirects >= limits.max_redirects)
                throw FetchError(FetchErrorKind::redirect_limit, start_url,
                                 "more than " + std::to_string(limits.max_redirects) + " redirects from " + start_url, 302);
            auto next = resolve_url(*current, trim(read_file(redirect_file)));
            if (!next) throw FetchError(FetchErrorKind::network, current->str(), "bad redirect target");
            current = *parse_url(next->without_fragment());
            continue;
        }

        std::vector<fs::path> choices;
        if (fs::is_directory(base)) choices.push_back(base / "index.html");
        choices.push_back(base);
        choices.push_back(fs::path(base.string() + ".html"));
        for (const auto& choice : choices) {
            if (!fs::is_regular_file(choice)) continue;
            auto body = read_file(choice);
            bool truncated = body.size() > limits.max_bytes;
            if (truncated) body.resize(limits.max_bytes);
            return {200, current->str(), std::move(body), "text/html; charset=utf-8", truncated};
        }
        throw FetchError(FetchErrorKind::http_status, current->str(), "HTTP 404 for " + current->str(), 404);
    }
}

} // namespace rightpath::discovery
