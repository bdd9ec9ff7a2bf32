// SPDX-License-Identifier: Apache-2.0
#include "rightpath/guidance.hpp"

#include "rightpath/text.hpp"
#include "rightpath/url.hpp"

#include <algorithm>

namespace rightpath::guidance {

namespace {

constexpr size_t max_depth = 512;

std::optional<bool> optional_bool(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_boolean()) throw SnapshotError(std::string("field '") + key + "' must be a boolean");
    return it->get<bool>();
}

std::string string_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw SnapshotError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

AccessibilityNode node_from_json(const nlohmann::json& j, size_t depth) {
    if (depth > max_depth) throw SnapshotError("tree deeper than " + std::to_string(max_depth) + " levels");
    if (!j.is_object()) throw SnapshotError("node must be an object");
    AccessibilityNode node;
    node.role = string_field(j, "role");
    node.name = string_field(j, "name");
    if (auto it = j.find("privyId"); it != j.end() && !it->is_null()) {
        if (it->is_string()) node.privy_id = it->get<std::string>();
        else if (it->is_number_integer()) node.privy_id = std::to_string(it->get<long long>());
        else throw SnapshotError("field 'privyId' must be a string");
    }
    node.disabled = optional_bool(j, "disabled");
    node.expanded = optional_bool(j, "expanded");
    node.checked = optional_bool(j, "checked");
    if (auto it = j.find("children"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw SnapshotError("field 'children' must be an array");
        node.children.reserve(it->size());
        for (const auto& child : *it) node.children.push_back(node_from_json(child, depth + 1));
    }
    return node;
}

nlohmann::json node_json(const AccessibilityNode& node, nlohmann::json children) {
    nlohmann::json j = {{"role", node.role}, {"name", node.name}};
    if (node.privy_id) j["privyId"] = *node.privy_id;
    if (node.disabled) j["disabled"] = *node.disabled;
    if (node.expanded) j["expanded"] = *node.expanded;
    if (node.checked) j["checked"] = *node.checked;
    if (!children.empty()) j["children"] = std::move(children);
    return j;
}

} // namespace

AccessibilitySnapshot::AccessibilitySnapshot(std::string url, std::string captured_at, AccessibilityNode root)
    : url_(std::move(url)), captured_at_(std::move(captured_at)), root_(std::move(root)) {
    NodePath path;
    auto walk = [&](auto&& self, const AccessibilityNode& node) -> void {
        ++node_count_;
        if (node.privy_id) {
            if (node.privy_id->empty()) throw SnapshotError("empty privyId");
            if (!id_index_.emplace(*node.privy_id, path).second)
                throw SnapshotError("duplicate privyId '" + *node.privy_id + "'");
        }
        for (size_t i = 0; i < node.children.size(); ++i) {
            path.push_back(i);
            self(self, node.children[i]);
            path.pop_back();
        }
    };
    walk(walk, root_);
}

const AccessibilityNode& AccessibilitySnapshot::at(const NodePath& path) const {
    const AccessibilityNode* node = &root_;
    for (auto i : path) {
        if (i >= node->children.size()) throw ContractViolation("node path out of range");
        node = &node->children[i];
    }
    return *node;
}

const AccessibilityNode* AccessibilitySnapshot::find(const std::string& privy_id) const {
    auto it = id_index_.find(privy_id);
    return it == id_index_.end() ? nullptr : &at(it->second);
}

std::string AccessibilitySnapshot::fingerprint() const {
    std::vector<std::string> names;
    names.reserve(id_index_.size());
    for (const auto& [id, path] : id_index_) names.push_back(collapse_whitespace(at(path).name));
    std::sort(names.begin(), names.end());
    nlohmann::json material = {{"url", strip_fragment(url_)}, {"names", names}};
    return sha256_hex(material.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

AccessibilitySnapshot snapshot_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SnapshotError("snapshot must be an object");
    if (auto tree = j.find("tree"); tree != j.end())
        return {string_field(j, "url"), string_field(j, "capturedAt"), node_from_json(*tree, 0)};
    return {"", "", node_from_json(j, 0)};
}

nlohmann::json to_json(const AccessibilityNode& node) {
    auto children = nlohmann::json::array();
    for (const auto& c : node.children) children.push_back(to_json(c));
    return node_json(node, std::move(children));
}

nlohmann::json to_json(const AccessibilitySnapshot& snapshot) {
    return {{"url", snapshot.url()}, {"capturedAt", snapshot.captured_at()}, {"tree", to_json(snapshot.root())}};
}

std::string serialize_snapshot(const AccessibilitySnapshot& snapshot, size_t node_budget) {
    if (node_budget == 0) throw ContractViolation("node budget must be positive");

    struct Flat {
        const AccessibilityNode* node;
        size_t depth;
        std::vector<size_t> children;
        bool interactive_below = false; // this node or any descendant bears a privyId
        bool removed = false;           // whole subtree dropped
        bool spliced = false;           // node dropped, children hoisted
    };
    std::vector<Flat> flat;
    flat.reserve(snapshot.node_count());
    auto build = [&](auto&& self, const AccessibilityNode& node, size_t depth) -> size_t {
        auto index = flat.size();
        flat.push_back({&node, depth, {}});
        bool interactive = node.privy_id.has_value();
        for (const auto& child : node.children) {
            auto ci = self(self, child, depth + 1);
            flat[index].children.push_back(ci);
            interactive = interactive || flat[ci].interactive_below;
        }
        flat[index].interactive_below = interactive;
        return index;
    };
    build(build, snapshot.root(), 0);

    size_t kept = flat.size();
    auto deepest_first = [&](std::vector<size_t>& order) {
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (flat[a].depth != flat[b].depth) return flat[a].depth > flat[b].depth;
            return a > b;
        });
    };

    if (kept > node_budget) {
        // Non-interactive subtrees, leaf by leaf from the bottom up. Children
        // are deeper than their parent, so a parent is only reached after its
        // whole subtree is gone.
        std::vector<size_t> order;
        for (size_t i = 1; i < flat.size(); ++i)
            if (!flat[i].interactive_below) order.push_back(i);
        deepest_first(order);
        for (auto i : order) {
            if (kept <= node_budget) break;
            flat[i].removed = true;
            --kept;
        }
    }
    if (kept > node_budget) {
        std::vector<size_t> order;
        for (size_t i = 1; i < flat.size(); ++i)
            if (!flat[i].removed && !flat[i].node->privy_id) order.push_back(i);
        deepest_first(order);
        for (auto i : order) {
            if (kept <= node_budget) break;
            flat[i].spliced = true;
            --kept;
        }
    }

    auto emit = [&](auto&& self, size_t index, nlohmann::json& out) -> void {
        const auto& f = flat[index];
        if (f.removed) return;
        auto children = nlohmann::json::array();
        for (auto c : f.children) self(self, c, children);
        if (f.spliced) {
            for (auto& c : children) out.push_back(std::move(c));
            return;
        }
        out.push_back(node_json(*f.node, std::move(children)));
    };
    auto roots = nlohmann::json::array();
    emit(emit, 0, roots);
    return roots.at(0).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

} // namespace rightpath::guidance
