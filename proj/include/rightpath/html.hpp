// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rightpath::html {

struct Token {
    enum class Kind { text, start_tag, end_tag, comment, doctype };

    Kind kind = Kind::text;
    std::string name; // lowercased tag name for tags
    std::vector<std::pair<std::string, std::string>> attributes; // names lowercased, values entity-decoded
    bool self_closing = false;
    std::string text; // entity-decoded for text tokens

    std::optional<std::string> attribute(std::string_view attr) const;
};

/// Tolerant tokenizer: never rejects input. Contents of script, style,
/// textarea and title are delivered as a single raw text token.
void tokenize(std::string_view html, const std::function<void(const Token&)>& sink);

std::string decode_entities(std::string_view s);

bool is_void_element(std::string_view name);

} // namespace rightpath::html
