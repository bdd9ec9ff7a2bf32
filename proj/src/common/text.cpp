// SPDX-License-Identifier: Apache-2.0
#include "rightpath/text.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <ctime>
#include <iomanip>
#include <sstream>

namespace rightpath {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

} // namespace

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) { return lower(a) == lower(b); });
    return it != haystack.end();
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        bool space = is_space(c);
        // U+00A0 NO-BREAK SPACE
        if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
            space = true;
            ++i;
        }
        if (space) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string normalize_for_match(std::string_view s) {
    std::string folded;
    folded.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        // U+2018..U+201F quotes and U+2032/U+2033 primes are E2 80 98..9F / E2 80 B2..B3
        if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
            auto t = static_cast<unsigned char>(s[i + 2]);
            if (t >= 0x98 && t <= 0x9B) {
                folded.push_back('\'');
                i += 2;
                continue;
            }
            if (t >= 0x9C && t <= 0x9F) {
                folded.push_back('"');
                i += 2;
                continue;
            }
            if (t == 0xB2) {
                folded.push_back('\'');
                i += 2;
                continue;
            }
            if (t == 0xB3) {
                folded.push_back('"');
                i += 2;
                continue;
            }
        }
        folded.push_back(c < 0x80 ? lower(static_cast<char>(c)) : static_cast<char>(c));
    }
    return collapse_whitespace(folded);
}

bool normalized_contains(std::string_view haystack, std::string_view needle) {
    auto n = normalize_for_match(needle);
    if (n.empty()) return false;
    return normalize_for_match(haystack).find(n) != std::string::npos;
}

std::string slugify(std::string_view s) {
    std::string out;
    bool dash = false;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (dash && !out.empty()) out.push_back('-');
            dash = false;
            out.push_back(lower(ch));
        } else {
            dash = true;
        }
    }
    return out;
}

bool is_slug(std::string_view s) { return !s.empty() && slugify(s) == s; }

bool is_email_address(std::string_view s) {
    auto at = s.find('@');
    if (at == std::string_view::npos || at == 0 || s.find('@', at + 1) != std::string_view::npos) return false;
    auto local = s.substr(0, at);
    auto domain = s.substr(at + 1);
    auto local_ok = [](char ch) {
        auto c = static_cast<unsigned char>(ch);
        return std::isalnum(c) || std::string_view("!#$%&'*+/=?^_`{|}~.-").find(ch) != std::string_view::npos;
    };
    if (!std::all_of(local.begin(), local.end(), local_ok)) return false;
    if (local.front() == '.' || local.back() == '.' || local.find("..") != std::string_view::npos) return false;
    auto labels = split(domain, '.');
    if (labels.size() < 2) return false;
    for (const auto& label : labels) {
        if (label.empty() || label.size() > 63 || label.front() == '-' || label.back() == '-') return false;
        for (char ch : label)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-') return false;
    }
    const auto& tld = labels.back();
    return tld.size() >= 2 && std::all_of(tld.begin(), tld.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

Clock system_clock() {
    return [] { return std::chrono::system_clock::now(); };
}

Clock fixed_clock(std::chrono::system_clock::time_point at) {
    return [at] { return at; };
}

std::string format_utc(std::chrono::system_clock::time_point tp) {
    auto t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::optional<std::chrono::system_clock::time_point> parse_utc(std::string_view s) {
    std::tm tm{};
    std::istringstream is{std::string(s)};
    is >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
    if (is.fail()) return std::nullopt;
    char z = 0;
    is >> z;
    if (z != 'Z') return std::nullopt;
    return std::chrono::system_clock::from_time_t(timegm(&tm));
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string strip_code_fence(std::string_view raw) {
    auto t = trim(raw);
    if (!t.starts_with("```")) return t;
    auto nl = t.find('\n');
    if (nl == std::string::npos || t.size() < nl + 4 || !t.ends_with("```")) return t;
    auto info = trim(std::string_view(t).substr(3, nl - 3));
    if (!info.empty() && info != "json") return t;
    return trim(std::string_view(t).substr(nl + 1, t.size() - nl - 4));
}

} // namespace rightpath
