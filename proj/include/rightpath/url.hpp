// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace rightpath {

/// Absolute hierarchical URL. Scheme and host are stored lowercased; the
/// port is empty when it was not written out.
struct Url {
    std::string scheme;
    std::string host;
    std::optional<int> port;
    std::string path = "/";
    std::string query;    // without '?'
    std::string fragment; // without '#'
    bool has_query = false;
    bool has_fragment = false;

    std::string str() const;
    std::string without_fragment() const;
    int effective_port() const;
    bool is_http() const { return scheme == "http" || scheme == "https"; }

    friend bool operator==(const Url&, const Url&) = default;
};

/// Parses an absolute URL (scheme "://" authority ...). Returns nullopt for
/// relative references or malformed input.
std::optional<Url> parse_url(std::string_view text);

/// RFC 3986 reference resolution. Returns nullopt when `reference` cannot be
/// resolved to a well-formed absolute URL.
std::optional<Url> resolve_url(const Url& base, std::string_view reference);

/// Strips a leading "www." and keeps the last two labels, or three when the
/// second-level label is a common public suffix part (co.uk, com.au, ...).
std::string registrable_domain(std::string_view host);

/// Same scheme, host and port.
bool same_origin(const Url& a, const Url& b);

/// URL string with the fragment removed; input returned as-is when it does not parse.
std::string strip_fragment(std::string_view url);

} // namespace rightpath
