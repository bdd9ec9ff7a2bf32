// SPDX-License-Identifier: Apache-2.0
#include "rightpath/guidance.hpp"

#include "rightpath/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace rightpath::guidance {

namespace {

struct Block {
    const char* name;
    std::string_view open;
    std::string_view close;
};

constexpr std::array<Block, 3> blocks{{
    {"REASONING", "[REASONING]", "[/REASONING]"},
    {"RESPONSE", "[RESPONSE]", "[/RESPONSE]"},
    {"MACHINE_OUTPUT", "[MACHINE_OUTPUT]", "[/MACHINE_OUTPUT]"},
}};

size_t count_of(std::string_view text, std::string_view tag) {
    size_t n = 0;
    for (auto pos = text.find(tag); pos != std::string_view::npos; pos = text.find(tag, pos + tag.size())) ++n;
    return n;
}

std::vector<Highlight> parse_machine_output(std::string_view body) {
    auto fail = [](const std::string& why) {
        return GuidanceParseError(TurnParseErrorKind::bad_machine_output, "MACHINE_OUTPUT", why);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(strip_code_fence(body));
    } catch (const nlohmann::json::parse_error& e) {
        throw fail(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) throw fail("expected an object");
    auto it = j.find("highlights");
    if (it == j.end() || !it->is_array()) throw fail("missing 'highlights' array");
    std::vector<Highlight> out;
    for (const auto& item : *it) {
        if (!item.is_object()) throw fail("highlight must be an object");
        auto label = item.find("label");
        auto id = item.find("id");
        if (label == item.end() || !label->is_string() || trim(label->get<std::string>()).empty())
            throw fail("highlight needs a non-empty string 'label'");
        Highlight h;
        h.label = label->get<std::string>();
        if (id != item.end() && id->is_string()) h.privy_id = id->get<std::string>();
        else if (id != item.end() && id->is_number_integer()) h.privy_id = std::to_string(id->get<long long>());
        else throw fail("highlight needs a string 'id'");
        if (h.privy_id.empty()) throw fail("highlight 'id' is empty");
        out.push_back(std::move(h));
    }
    return out;
}

} // namespace

std::string to_string(TurnParseErrorKind kind) {
    switch (kind) {
    case TurnParseErrorKind::missing_block: return "missing_block";
    case TurnParseErrorKind::out_of_order: return "out_of_order";
    case TurnParseErrorKind::duplicate_block: return "duplicate_block";
    case TurnParseErrorKind::bad_machine_output: return "bad_machine_output";
    }
    return "unknown";
}

GuidanceParseError::GuidanceParseError(TurnParseErrorKind kind, std::string block, const std::string& message)
    : Error("guidance_" + to_string(kind), message), kind_(kind), block_(std::move(block)) {}

GuidanceTurn parse_guidance_response(std::string_view raw) {
    std::array<size_t, 6> positions{};
    for (size_t b = 0; b < blocks.size(); ++b) {
        for (int side = 0; side < 2; ++side) {
            auto tag = side == 0 ? blocks[b].open : blocks[b].close;
            auto n = count_of(raw, tag);
            if (n == 0)
                throw GuidanceParseError(TurnParseErrorKind::missing_block, blocks[b].name,
                                         "missing " + std::string(tag) + " in " + blocks[b].name + " block");
            if (n > 1)
                throw GuidanceParseError(TurnParseErrorKind::duplicate_block, blocks[b].name,
                                         std::string(tag) + " appears " + std::to_string(n) + " times");
            positions[b * 2 + side] = raw.find(tag);
        }
    }
    for (size_t i = 1; i < positions.size(); ++i) {
        auto prev_len = (i - 1) % 2 == 0 ? blocks[(i - 1) / 2].open.size() : blocks[(i - 1) / 2].close.size();
        if (positions[i] < positions[i - 1] + prev_len)
            throw GuidanceParseError(TurnParseErrorKind::out_of_order, blocks[i / 2].name,
                                     std::string("block ") + blocks[i / 2].name + " is out of order");
    }
    auto body = [&](size_t b) {
        auto start = positions[b * 2] + blocks[b].open.size();
        return trim(raw.substr(start, positions[b * 2 + 1] - start));
    };
    GuidanceTurn turn;
    turn.reasoning = body(0);
    turn.response_text = body(1);
    turn.highlights = parse_machine_output(body(2));
    return turn;
}

std::string format_guidance_response(const GuidanceTurn& turn) {
    auto highlights = nlohmann::json::array();
    for (const auto& h : turn.highlights) highlights.push_back({{"label", h.label}, {"id", h.privy_id}});
    nlohmann::json machine = {{"highlights", highlights}};
    return "[REASONING]\n" + turn.reasoning + "\n[/REASONING]\n\n[RESPONSE]\n" + turn.response_text +
           "\n[/RESPONSE]\n\n[MACHINE_OUTPUT]\n" + machine.dump() + "\n[/MACHINE_OUTPUT]\n";
}

UnknownPrivyId::UnknownPrivyId(std::vector<std::string> ids)
    : Error("unknown_privy_id",
            [&] {
                std::string joined;
                for (const auto& id : ids) joined += (joined.empty() ? "" : ", ") + id;
                return "snapshot has no element with id: " + joined;
            }()),
      ids_(std::move(ids)) {}

std::vector<ResolvedHighlight> resolve_highlights(const GuidanceTurn& turn, const AccessibilitySnapshot& snapshot) {
    std::vector<ResolvedHighlight> out;
    std::vector<std::string> missing;
    for (const auto& h : turn.highlights) {
        auto it = snapshot.id_index().find(h.privy_id);
        if (it == snapshot.id_index().end()) {
            missing.push_back(h.privy_id);
            continue;
        }
        out.push_back({h, it->second, &snapshot.at(it->second)});
    }
    if (!missing.empty()) throw UnknownPrivyId(std::move(missing));
    return out;
}

} // namespace rightpath::guidance
