// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations shared by the unit tests and the
// acceptance binary.
#pragma once

#include "rightpath/eval.hpp"

#include <random>
#include <string>
#include <vector>

namespace testing {

/// Best (cardinality, similarity sum) over every injective assignment,
/// found by trying each option for each extracted row.
inline rightpath::eval::MatchScore brute_force_score(const rightpath::eval::SimilarityMatrix& sim) {
    using rightpath::eval::MatchScore;
    size_t cols = sim.empty() ? 0 : sim[0].size();
    std::vector<bool> used(cols, false);
    MatchScore best;
    MatchScore current;
    auto go = [&](auto&& self, size_t row) -> void {
        if (row == sim.size()) {
            if (rightpath::eval::better(current, best)) best = current;
            return;
        }
        self(self, row + 1);
        for (size_t c = 0; c < cols; ++c) {
            if (used[c] || !sim[row][c]) continue;
            used[c] = true;
            ++current.cardinality;
            current.total_similarity += *sim[row][c];
            self(self, row + 1);
            --current.cardinality;
            current.total_similarity -= *sim[row][c];
            used[c] = false;
        }
    };
    go(go, 0);
    return best;
}

struct RandomMatchCase {
    std::vector<rightpath::rights::Right> extracted;
    std::vector<rightpath::eval::GroundTruthRight> gt;
};

/// Labels drawn from a small vocabulary so that similarities collide and
/// ties are common; mechanisms from two values so some pairs are ineligible.
inline RandomMatchCase random_match_case(std::mt19937& rng, size_t max_size = 8) {
    static const std::vector<std::string> vocab{"delete", "account", "data", "access", "copy", "opt", "out",
                                                "sale", "personal", "information", "correct"};
    auto label = [&] {
        std::string s;
        for (int k = 1 + static_cast<int>(rng() % 3); k > 0; --k) s += (s.empty() ? "" : " ") + vocab[rng() % vocab.size()];
        return s;
    };
    auto mech = [&] {
        return rng() % 2 ? rightpath::rights::Mechanism::navigation : rightpath::rights::Mechanism::email;
    };
    RandomMatchCase out;
    size_t ne = rng() % (max_size + 1);
    size_t ng = rng() % (max_size + 1);
    for (size_t i = 0; i < ne; ++i) {
        rightpath::rights::Right r;
        r.id = "r" + std::to_string(i);
        r.label = label();
        r.mechanism = mech();
        r.action_value = rng() % 5 == 0 ? "shared-" + std::to_string(rng() % 3) : "x" + std::to_string(i);
        out.extracted.push_back(r);
    }
    for (size_t i = 0; i < ng; ++i) {
        rightpath::eval::GroundTruthRight g;
        g.site = "s.test";
        g.label = label();
        g.mechanism = mech();
        if (rng() % 5 == 0) g.action_value = "shared-" + std::to_string(rng() % 3);
        g.jurisdiction = "CCPA";
        out.gt.push_back(g);
    }
    return out;
}

} // namespace testing
