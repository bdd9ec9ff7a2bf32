// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rightpath {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);

/// Collapses every run of ASCII whitespace (and U+00A0) to a single space and trims.
std::string collapse_whitespace(std::string_view s);

/// Normalization used for excerpt evidence checks: smart quotes and primes
/// become ASCII quotes, ASCII case is folded, whitespace is collapsed.
std::string normalize_for_match(std::string_view s);

/// True when `needle` is non-empty after normalization and occurs in the
/// normalized `haystack`.
bool normalized_contains(std::string_view haystack, std::string_view needle);

/// Lowercase ASCII slug: alphanumerics kept, every other run becomes '-'.
std::string slugify(std::string_view s);
bool is_slug(std::string_view s);

bool is_email_address(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// Removes one surrounding ``` or ```json fence; other text is returned trimmed.
std::string strip_code_fence(std::string_view raw);

using Clock = std::function<std::chrono::system_clock::time_point()>;

Clock system_clock();
Clock fixed_clock(std::chrono::system_clock::time_point at);

/// "2026-10-15T07:41:00Z" (seconds precision, UTC).
std::string format_utc(std::chrono::system_clock::time_point tp);
std::optional<std::chrono::system_clock::time_point> parse_utc(std::string_view s);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

} // namespace rightpath
