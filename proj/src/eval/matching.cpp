// SPDX-License-Identifier: Apache-2.0
#include "rightpath/eval.hpp"

#include "rightpath/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>

namespace rightpath::eval {

size_t Corpus::size() const {
    size_t n = 0;
    for (const auto& [site, rows] : sites) n += rows.size();
    return n;
}

CorpusError::CorpusError(size_t row, const std::string& message)
    : Error("corpus_invalid", row ? "row " + std::to_string(row) + ": " + message : message), row_(row) {}

Corpus corpus_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw CorpusError(0, "corpus must be a JSON array");
    Corpus corpus;
    std::set<std::pair<std::string, std::string>> seen;
    size_t row = 0;
    for (const auto& item : j) {
        ++row;
        if (!item.is_object()) throw CorpusError(row, "entry must be an object");
        auto text = [&](const char* key, bool required) -> std::optional<std::string> {
            auto it = item.find(key);
            if (it == item.end() || it->is_null()) {
                if (required) throw CorpusError(row, std::string("missing \"") + key + "\"");
                return std::nullopt;
            }
            if (!it->is_string()) throw CorpusError(row, std::string("\"") + key + "\" must be a string");
            return it->get<std::string>();
        };
        GroundTruthRight gt;
        gt.site = trim(*text("site", true));
        gt.label = trim(*text("label", true));
        if (gt.site.empty()) throw CorpusError(row, "empty site");
        if (gt.label.empty()) throw CorpusError(row, "empty label");
        auto mechanism = rights::mechanism_from_string(*text("mechanism", true));
        if (!mechanism) throw CorpusError(row, "illegal mechanism");
        gt.mechanism = *mechanism;
        gt.action_value = text("action_value", false);
        gt.jurisdiction = text("jurisdiction", false).value_or("");
        if (!seen.emplace(gt.site, to_lower(collapse_whitespace(gt.label))).second)
            throw CorpusError(row, "duplicate label \"" + gt.label + "\" for site " + gt.site);
        corpus.sites[gt.site].push_back(std::move(gt));
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError(0, "cannot open " + path.string());
    try {
        return corpus_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError(0, std::string("not JSON: ") + e.what());
    }
}

std::vector<std::string> label_tokens(std::string_view label) {
    static const std::set<std::string> stop{"a",  "an",   "and", "any",  "are", "as",  "at",   "be",   "by",
                                            "for", "from", "i",   "in",   "is",  "it",  "me",   "my",   "of",
                                            "on",  "or",   "our", "that", "the", "this", "to",  "us",   "with",
                                            "you", "your"};
    std::set<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !stop.count(current)) tokens.insert(current);
        current.clear();
    };
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c))) current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else flush();
    }
    flush();
    return {tokens.begin(), tokens.end()};
}

double label_similarity(std::string_view a, std::string_view b) {
    auto ta = label_tokens(a);
    auto tb = label_tokens(b);
    if (ta.empty() || tb.empty()) return 0.0;
    std::vector<std::string> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    auto uni = ta.size() + tb.size() - common.size();
    return static_cast<double>(common.size()) / static_cast<double>(uni);
}

std::optional<double> pair_similarity(const rights::Right& extracted, const GroundTruthRight& gt,
                                      const MatchRule& rule) {
    auto ev = trim(extracted.action_value);
    if (gt.action_value && !ev.empty() && ev == trim(*gt.action_value)) return 1.0;
    if (extracted.mechanism != gt.mechanism) return std::nullopt;
    auto s = label_similarity(extracted.label, gt.label);
    if (s + 1e-12 < rule.threshold) return std::nullopt;
    return s;
}

bool better(const MatchScore& a, const MatchScore& b) {
    if (a.cardinality != b.cardinality) return a.cardinality > b.cardinality;
    return a.total_similarity > b.total_similarity + 1e-9;
}

MatchScore score_of(const std::vector<MatchPair>& pairs) {
    MatchScore s;
    s.cardinality = pairs.size();
    for (const auto& p : pairs) s.total_similarity += p.similarity;
    return s;
}

SimilarityMatrix similarity_matrix(const std::vector<rights::Right>& extracted,
                                   const std::vector<GroundTruthRight>& gt, const MatchRule& rule) {
    SimilarityMatrix m(extracted.size(), std::vector<std::optional<double>>(gt.size()));
    for (size_t i = 0; i < extracted.size(); ++i)
        for (size_t j = 0; j < gt.size(); ++j) m[i][j] = pair_similarity(extracted[i], gt[j], rule);
    return m;
}

std::vector<MatchPair> greedy_match(const SimilarityMatrix& sim) {
    std::vector<MatchPair> candidates;
    for (size_t i = 0; i < sim.size(); ++i)
        for (size_t j = 0; j < sim[i].size(); ++j)
            if (sim[i][j]) candidates.push_back({i, j, *sim[i][j]});
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const MatchPair& a, const MatchPair& b) { return a.similarity > b.similarity; });
    std::vector<bool> used_e(sim.size()), used_g(sim.empty() ? 0 : sim[0].size());
    std::vector<MatchPair> out;
    for (const auto& c : candidates) {
        if (used_e[c.extracted] || used_g[c.gt]) continue;
        used_e[c.extracted] = used_g[c.gt] = true;
        out.push_back(c);
    }
    return out;
}

std::vector<MatchPair> optimal_match(const SimilarityMatrix& sim) {
    size_t rows = sim.size();
    size_t cols = rows ? sim[0].size() : 0;
    if (rows == 0 || cols == 0) return {};

    // Hungarian method (potentials form) minimizing cost over an n x m
    // matrix with n <= m. A large constant per eligible pair makes
    // cardinality dominate the similarity sum.
    bool transpose = rows > cols;
    size_t n = transpose ? cols : rows;
    size_t m = transpose ? rows : cols;
    auto weight = [&](size_t r, size_t c) {
        const auto& s = transpose ? sim[c][r] : sim[r][c];
        return s ? 1000.0 + *s : 0.0;
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1), v(m + 1);
    std::vector<size_t> p(m + 1), way(m + 1);
    for (size_t i = 1; i <= n; ++i) {
        p[0] = i;
        size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<MatchPair> out;
    for (size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        size_t r = p[j] - 1, c = j - 1;
        size_t e = transpose ? c : r, g = transpose ? r : c;
        if (sim[e][g]) out.push_back({e, g, *sim[e][g]});
    }
    std::sort(out.begin(), out.end(), [](const MatchPair& a, const MatchPair& b) { return a.extracted < b.extracted; });
    return out;
}

std::vector<MatchPair> match_rights(const std::vector<rights::Right>& extracted,
                                    const std::vector<GroundTruthRight>& gt, const MatchRule& rule) {
    auto sim = similarity_matrix(extracted, gt, rule);
    auto greedy = greedy_match(sim);
    auto optimal = optimal_match(sim);
    return better(score_of(optimal), score_of(greedy)) ? optimal : greedy;
}

} // namespace rightpath::eval
