// SPDX-License-Identifier: Apache-2.0
#include "rightpath/discovery.hpp"

#include "rightpath/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace rightpath::discovery {

namespace {

template <size_t N>
bool one_of(std::string_view name, const std::array<const char*, N>& set) {
    return std::find(set.begin(), set.end(), name) != set.end();
}

constexpr std::array skipped{"script", "style", "noscript", "template", "svg",    "iframe", "head",
                             "nav",    "header", "footer",  "aside",    "select", "canvas", "object"};
constexpr std::array paragraph_blocks{"p",  "h1", "h2",    "h3",         "h4",      "h5",  "h6",
                                      "section", "table", "blockquote", "pre", "ul", "ol", "dl", "figure", "address", "hr"};
constexpr std::array line_blocks{"div", "li", "tr", "dt", "dd", "br", "main", "article", "figcaption", "caption", "body"};

bool is_main_container(const html::Token& t) {
    if (t.name == "main") return true;
    auto role = t.attribute("role");
    return role && to_lower(trim(*role)) == "main";
}

// Text that would read as markup after entity decoding ("&lt;b&gt;") gets a
// space after '<' so the output never contains a tag-shaped sequence.
std::string defuse_tags(std::string s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        out.push_back(s[i]);
        if (s[i] == '<' && i + 1 < s.size()) {
            auto next = static_cast<unsigned char>(s[i + 1]);
            if (std::isalpha(next) || next == '/' || next == '!' || next == '?') out.push_back(' ');
        }
    }
    return out;
}

} // namespace

std::string extract_readable_text(std::string_view html) {
    // Pick the container: <main>/role=main, else <article>, else the whole document.
    enum class Scope { document, main, article };
    Scope scope = Scope::document;
    html::tokenize(html, [&](const html::Token& t) {
        if (t.kind != html::Token::Kind::start_tag) return;
        if (is_main_container(t)) scope = Scope::main;
        else if (t.name == "article" && scope == Scope::document) scope = Scope::article;
    });

    struct Open {
        std::string name;
        bool skip;
        bool container;
    };
    std::vector<Open> stack;
    std::vector<std::string> lines; // "" marks a paragraph break
    std::string current;

    auto skipping = [&] {
        return std::any_of(stack.begin(), stack.end(), [](const Open& o) { return o.skip; });
    };
    auto inside_container = [&] {
        if (scope == Scope::document) return true;
        return std::any_of(stack.begin(), stack.end(), [](const Open& o) { return o.container; });
    };
    auto flush_line = [&](bool paragraph) {
        auto line = collapse_whitespace(current);
        current.clear();
        if (!line.empty()) lines.push_back(std::move(line));
        if (paragraph && !lines.empty() && !lines.back().empty()) lines.emplace_back();
    };
    auto boundary = [&](std::string_view name) {
        if (one_of(name, paragraph_blocks)) flush_line(true);
        else if (one_of(name, line_blocks)) flush_line(false);
        else if (name == "td" || name == "th") current += ' ';
    };

    html::tokenize(html, [&](const html::Token& t) {
        using Kind = html::Token::Kind;
        switch (t.kind) {
        case Kind::start_tag: {
            if (!skipping() && inside_container()) boundary(t.name);
            if (html::is_void_element(t.name) || t.self_closing) break;
            bool container = (scope == Scope::main && is_main_container(t)) || (scope == Scope::article && t.name == "article");
            stack.push_back({t.name, one_of(t.name, skipped), container});
            break;
        }
        case Kind::end_tag: {
            auto it = std::find_if(stack.rbegin(), stack.rend(), [&](const Open& o) { return o.name == t.name; });
            if (it == stack.rend()) break;
            stack.erase(std::prev(it.base()), stack.end());
            if (!skipping() && inside_container()) boundary(t.name);
            if (!skipping() && scope != Scope::document && (t.name == "main" || t.name == "article")) flush_line(true);
            break;
        }
        case Kind::text:
            if (!skipping() && inside_container()) current += t.text;
            break;
        default: break;
        }
    });
    flush_line(true);

    std::string out;
    bool paragraph = false;
    for (const auto& line : lines) {
        if (line.empty()) {
            paragraph = true;
            continue;
        }
        if (!out.empty()) out += paragraph ? "\n\n" : "\n";
        paragraph = false;
        out += line;
    }
    return defuse_tags(std::move(out));
}

} // namespace rightpath::discovery
