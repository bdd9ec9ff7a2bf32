// SPDX-License-Identifier: Apache-2.0
#include "rightpath/html.hpp"

#include "rightpath/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

namespace rightpath::html {

namespace {

void append_utf8(std::string& out, unsigned long cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

const std::unordered_map<std::string_view, unsigned long>& named_entities() {
    static const std::unordered_map<std::string_view, unsigned long> table{
        {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},     {"apos", '\''},
        {"nbsp", 0xA0},     {"copy", 0xA9},     {"reg", 0xAE},      {"trade", 0x2122}, {"mdash", 0x2014},
        {"ndash", 0x2013},  {"lsquo", 0x2018},  {"rsquo", 0x2019},  {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"hellip", 0x2026}, {"bull", 0x2022},   {"middot", 0xB7},   {"sect", 0xA7},    {"para", 0xB6},
        {"laquo", 0xAB},    {"raquo", 0xBB},    {"eacute", 0xE9},   {"egrave", 0xE8},  {"uuml", 0xFC},
        {"ouml", 0xF6},     {"auml", 0xE4},     {"szlig", 0xDF},    {"zwj", 0x200D},   {"zwnj", 0x200C},
    };
    return table;
}

bool is_raw_text(std::string_view name) {
    return name == "script" || name == "style" || name == "textarea" || name == "title";
}

bool name_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '-' || c == '_' || c == ':' || c == '.';
}

} // namespace

std::optional<std::string> Token::attribute(std::string_view attr) const {
    for (const auto& [k, v] : attributes)
        if (k == attr) return v;
    return std::nullopt;
}

bool is_void_element(std::string_view name) {
    static constexpr std::array voids{"area", "base", "br",   "col",   "embed",  "hr",    "img",
                                      "input", "link", "meta", "param", "source", "track", "wbr"};
    return std::find(voids.begin(), voids.end(), name) != voids.end();
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        auto body = s.substr(i + 1, semi - i - 1);
        if (!body.empty() && body[0] == '#') {
            bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
            auto digits = body.substr(hex ? 2 : 1);
            unsigned long cp = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                auto u = static_cast<unsigned char>(c);
                if (hex ? !std::isxdigit(u) : !std::isdigit(u)) {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<unsigned long>(std::isdigit(u) ? c - '0' : std::tolower(u) - 'a' + 10);
                if (cp > 0x10FFFF) cp = 0x110000;
            }
            if (ok) {
                append_utf8(out, cp);
                i = semi;
                continue;
            }
        } else if (auto it = named_entities().find(body); it != named_entities().end()) {
            append_utf8(out, it->second);
            i = semi;
            continue;
        }
        out.push_back('&');
    }
    return out;
}

void tokenize(std::string_view html, const std::function<void(const Token&)>& sink) {
    size_t i = 0;
    const size_t n = html.size();
    std::string pending_text;

    auto flush_text = [&] {
        if (pending_text.empty()) return;
        Token t;
        t.kind = Token::Kind::text;
        t.text = decode_entities(pending_text);
        pending_text.clear();
        sink(t);
    };

    while (i < n) {
        if (html[i] != '<') {
            auto next = html.find('<', i);
            if (next == std::string_view::npos) next = n;
            pending_text.append(html.substr(i, next - i));
            i = next;
            continue;
        }
        // Comments, doctype and processing instructions.
        if (html.substr(i, 4) == "<!--") {
            flush_text();
            auto end = html.find("-->", i + 4);
            Token t;
            t.kind = Token::Kind::comment;
            t.text = std::string(html.substr(i + 4, (end == std::string_view::npos ? n : end) - i - 4));
            sink(t);
            i = end == std::string_view::npos ? n : end + 3;
            continue;
        }
        if (i + 1 < n && (html[i + 1] == '!' || html[i + 1] == '?')) {
            flush_text();
            auto end = html.find('>', i);
            Token t;
            t.kind = Token::Kind::doctype;
            t.text = std::string(html.substr(i, (end == std::string_view::npos ? n : end) - i));
            sink(t);
            i = end == std::string_view::npos ? n : end + 1;
            continue;
        }
        bool closing = i + 1 < n && html[i + 1] == '/';
        size_t name_start = i + (closing ? 2 : 1);
        if (name_start >= n || !std::isalpha(static_cast<unsigned char>(html[name_start]))) {
            // A bare '<' is text.
            pending_text.push_back('<');
            ++i;
            continue;
        }
        flush_text();
        size_t p = name_start;
        while (p < n && name_char(html[p])) ++p;
        Token tag;
        tag.kind = closing ? Token::Kind::end_tag : Token::Kind::start_tag;
        tag.name = to_lower(html.substr(name_start, p - name_start));

        // Attributes.
        while (p < n && html[p] != '>') {
            auto c = html[p];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++p;
                continue;
            }
            if (c == '/') {
                if (p + 1 < n && html[p + 1] == '>') tag.self_closing = true;
                ++p;
                continue;
            }
            size_t a = p;
            while (p < n && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '=' && html[p] != '>' &&
                   !(html[p] == '/' && p + 1 < n && html[p + 1] == '>'))
                ++p;
            std::string attr_name = to_lower(html.substr(a, p - a));
            while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
            std::string value;
            if (p < n && html[p] == '=') {
                ++p;
                while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
                if (p < n && (html[p] == '"' || html[p] == '\'')) {
                    char q = html[p++];
                    auto close = html.find(q, p);
                    if (close == std::string_view::npos) close = n;
                    value = std::string(html.substr(p, close - p));
                    p = close < n ? close + 1 : n;
                } else {
                    size_t v = p;
                    while (p < n && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '>') ++p;
                    value = std::string(html.substr(v, p - v));
                }
            }
            if (!attr_name.empty() && !tag.attribute(attr_name)) tag.attributes.emplace_back(attr_name, decode_entities(value));
        }
        i = p < n ? p + 1 : n;
        if (closing) tag.attributes.clear();
        sink(tag);

        if (!closing && !tag.self_closing && is_raw_text(tag.name)) {
            // Raw text runs until the matching close tag, case-insensitively.
            std::string close = "</" + tag.name;
            size_t end = i;
            while (true) {
                end = html.find("</", end);
                if (end == std::string_view::npos) {
                    end = n;
                    break;
                }
                if (to_lower(html.substr(end, close.size())) == close) break;
                end += 2;
            }
            Token raw;
            raw.kind = Token::Kind::text;
            raw.text = tag.name == "textarea" || tag.name == "title" ? decode_entities(html.substr(i, end - i))
                                                                    : std::string(html.substr(i, end - i));
            if (!raw.text.empty()) sink(raw);
            i = end;
            if (end < n) {
                auto gt = html.find('>', end);
                Token close_tag;
                close_tag.kind = Token::Kind::end_tag;
                close_tag.name = tag.name;
                sink(close_tag);
                i = gt == std::string_view::npos ? n : gt + 1;
            }
        }
    }
    flush_text();
}

} // namespace rightpath::html
