// SPDX-License-Identifier: Apache-2.0
#include "rightpath/url.hpp"

#include "rightpath/text.hpp"

#include <array>
#include <cctype>

namespace rightpath {

namespace {

bool valid_scheme(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return false;
    return true;
}

bool valid_host(std::string_view h) {
    if (h.empty()) return false;
    if (h.front() == '[') return h.back() == ']';
    for (char c : h) {
        auto u = static_cast<unsigned char>(c);
        if (!(std::isalnum(u) || c == '-' || c == '.' || c == '_' || u >= 0x80)) return false;
    }
    return h.front() != '.' && h.find("..") == std::string_view::npos;
}

// RFC 3986 section 5.2.4
std::string remove_dot_segments(std::string_view in) {
    std::string input(in);
    std::string output;
    while (!input.empty()) {
        if (input.starts_with("../")) {
            input.erase(0, 3);
        } else if (input.starts_with("./")) {
            input.erase(0, 2);
        } else if (input.starts_with("/./")) {
            input.replace(0, 3, "/");
        } else if (input == "/.") {
            input = "/";
        } else if (input.starts_with("/../") || input == "/..") {
            input = input.size() == 3 ? std::string("/") : input.replace(0, 4, "/");
            auto slash = output.rfind('/');
            output.erase(slash == std::string::npos ? 0 : slash);
        } else if (input == "." || input == "..") {
            input.clear();
        } else {
            size_t start = input[0] == '/' ? 1 : 0;
            auto next = input.find('/', start);
            if (next == std::string::npos) next = input.size();
            output += input.substr(0, next);
            input.erase(0, next);
        }
    }
    return output;
}

std::string merge_paths(const Url& base, std::string_view ref_path) {
    if (base.path.empty()) return "/" + std::string(ref_path);
    auto slash = base.path.rfind('/');
    return base.path.substr(0, slash + 1) + std::string(ref_path);
}

void split_tail(std::string_view rest, Url& url) {
    auto hash = rest.find('#');
    if (hash != std::string_view::npos) {
        url.fragment = std::string(rest.substr(hash + 1));
        url.has_fragment = true;
        rest = rest.substr(0, hash);
    }
    auto q = rest.find('?');
    if (q != std::string_view::npos) {
        url.query = std::string(rest.substr(q + 1));
        url.has_query = true;
        rest = rest.substr(0, q);
    }
    url.path = std::string(rest);
}

} // namespace

std::string Url::str() const {
    std::string out = scheme + "://" + host;
    if (port) out += ":" + std::to_string(*port);
    out += path.empty() ? "/" : path;
    if (has_query) out += "?" + query;
    if (has_fragment) out += "#" + fragment;
    return out;
}

std::string Url::without_fragment() const {
    Url copy = *this;
    copy.fragment.clear();
    copy.has_fragment = false;
    return copy.str();
}

int Url::effective_port() const {
    if (port) return *port;
    return scheme == "https" ? 443 : 80;
}

std::optional<Url> parse_url(std::string_view text) {
    auto t = trim(text);
    std::string_view s = t;
    auto colon = s.find("://");
    if (colon == std::string_view::npos || !valid_scheme(s.substr(0, colon))) return std::nullopt;
    for (char c : s)
        if (std::isspace(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) < 0x20) return std::nullopt;

    Url url;
    url.scheme = to_lower(s.substr(0, colon));
    auto rest = s.substr(colon + 3);
    auto auth_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, auth_end);
    rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

    auto at = authority.rfind('@');
    if (at != std::string_view::npos) authority = authority.substr(at + 1);
    auto port_sep = authority.rfind(':');
    if (port_sep != std::string_view::npos && authority.find(']', port_sep) == std::string_view::npos) {
        auto port_text = authority.substr(port_sep + 1);
        authority = authority.substr(0, port_sep);
        if (!port_text.empty()) {
            if (port_text.size() > 5) return std::nullopt;
            int p = 0;
            for (char c : port_text) {
                if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
                p = p * 10 + (c - '0');
            }
            if (p == 0 || p > 65535) return std::nullopt;
            url.port = p;
        }
    }
    if (!valid_host(authority)) return std::nullopt;
    url.host = to_lower(authority);
    split_tail(rest, url);
    if (url.path.empty()) url.path = "/";
    url.path = remove_dot_segments(url.path);
    if (url.path.empty()) url.path = "/";
    return url;
}

std::optional<Url> resolve_url(const Url& base, std::string_view reference) {
    auto ref = trim(reference);
    if (auto absolute = parse_url(ref)) return absolute;
    // A scheme without "//" (mailto:, javascript:, tel:) is not hierarchical.
    auto colon = ref.find(':');
    if (colon != std::string::npos && valid_scheme(std::string_view(ref).substr(0, colon)) &&
        ref.find_first_of("/?#") > colon)
        return std::nullopt;
    for (char c : ref)
        if (static_cast<unsigned char>(c) < 0x20) return std::nullopt;

    if (ref.starts_with("//")) return parse_url(base.scheme + ":" + ref);

    Url target;
    target.scheme = base.scheme;
    target.host = base.host;
    target.port = base.port;
    Url tail;
    split_tail(ref, tail);
    if (tail.path.empty()) {
        target.path = base.path;
        if (tail.has_query) {
            target.query = tail.query;
            target.has_query = true;
        } else {
            target.query = base.query;
            target.has_query = base.has_query;
        }
    } else {
        target.path = tail.path.starts_with("/") ? remove_dot_segments(tail.path)
                                                 : remove_dot_segments(merge_paths(base, tail.path));
        target.query = tail.query;
        target.has_query = tail.has_query;
    }
    target.fragment = tail.fragment;
    target.has_fragment = tail.has_fragment;
    if (target.path.empty()) target.path = "/";
    // Spaces inside hrefs are common in the wild; percent-encode them.
    std::string encoded;
    for (char c : target.path) {
        if (c == ' ')
            encoded += "%20";
        else
            encoded.push_back(c);
    }
    target.path = std::move(encoded);
    return target;
}

std::string registrable_domain(std::string_view host_in) {
    auto host = to_lower(host_in);
    if (host.starts_with("www.")) host.erase(0, 4);
    auto labels = split(host, '.');
    if (labels.size() <= 2) return host;
    bool numeric = true;
    for (char c : host)
        if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.') numeric = false;
    if (numeric) return host;
    static constexpr std::array second_level{"co", "com", "ac", "gov", "org", "net", "edu", "ne", "or", "go"};
    const auto& sld = labels[labels.size() - 2];
    bool compound = labels.back().size() == 2 &&
                    std::find(second_level.begin(), second_level.end(), sld) != second_level.end();
    size_t keep = compound ? 3 : 2;
    std::string out;
    for (size_t i = labels.size() - keep; i < labels.size(); ++i) {
        if (!out.empty()) out.push_back('.');
        out += labels[i];
    }
    return out;
}

bool same_origin(const Url& a, const Url& b) {
    return a.scheme == b.scheme && a.host == b.host && a.effective_port() == b.effective_port();
}

std::string strip_fragment(std::string_view url) {
    if (auto parsed = parse_url(url)) return parsed->without_fragment();
    return std::string(url);
}

} // namespace rightpath
