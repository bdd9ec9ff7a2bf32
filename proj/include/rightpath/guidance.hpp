// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rightpath/error.hpp"
#include "rightpath/llm.hpp"
#include "rightpath/rights.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rightpath::guidance {

// ---------------------------------------------------------------------------
// Accessibility snapshots

struct AccessibilityNode {
    std::string role;
    std::string name;
    std::optional<std::string> privy_id; // present iff the element is interactive
    std::optional<bool> disabled;
    std::optional<bool> expanded;
    std::optional<bool> checked;
    std::vector<AccessibilityNode> children;

    friend bool operator==(const AccessibilityNode&, const AccessibilityNode&) = default;
};

/// Child-index path from the root.
using NodePath = std::vector<size_t>;

class SnapshotError : public Error {
public:
    explicit SnapshotError(const std::string& message) : Error("bad_snapshot", message) {}
};

/// Immutable page snapshot. Construction indexes every privyId and rejects
/// duplicates.
class AccessibilitySnapshot {
public:
    AccessibilitySnapshot(std::string url, std::string captured_at, AccessibilityNode root);

    const std::string& url() const { return url_; }
    const std::string& captured_at() const { return captured_at_; }
    const AccessibilityNode& root() const { return root_; }
    const std::map<std::string, NodePath>& id_index() const { return id_index_; }

    const AccessibilityNode* find(const std::string& privy_id) const;
    const AccessibilityNode& at(const NodePath& path) const;
    size_t node_count() const { return node_count_; }

    /// Digest of the fragment-stripped URL plus the sorted multiset of
    /// interactive node names. Survives id regeneration on re-capture.
    std::string fingerprint() const;

private:
    std::string url_;
    std::string captured_at_;
    AccessibilityNode root_;
    std::map<std::string, NodePath> id_index_;
    size_t node_count_ = 0;
};

/// Ingestion format: {"url", "capturedAt", "tree": node} where node is
/// {role, name, privyId?, disabled?, expanded?, checked?, children?}.
/// A bare node object is accepted as the tree.
AccessibilitySnapshot snapshot_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AccessibilityNode& node);
nlohmann::json to_json(const AccessibilitySnapshot& snapshot);

/// Depth-first JSON of the tree under a node budget. Over budget, leaves
/// without interactive descendants go first (deepest first), then
/// non-interactive wrappers are spliced out (deepest first). Interactive
/// nodes and the root are always kept.
std::string serialize_snapshot(const AccessibilitySnapshot& snapshot, size_t node_budget = 1500);

// ---------------------------------------------------------------------------
// Guidance turns

struct Highlight {
    std::string label;
    std::string privy_id;

    friend bool operator==(const Highlight&, const Highlight&) = default;
};

struct GuidanceTurn {
    std::string reasoning; // never leaves the engine
    std::string response_text;
    std::vector<Highlight> highlights;

    friend bool operator==(const GuidanceTurn&, const GuidanceTurn&) = default;
};

enum class TurnParseErrorKind { missing_block, out_of_order, duplicate_block, bad_machine_output };

std::string to_string(TurnParseErrorKind kind);

class GuidanceParseError : public Error {
public:
    GuidanceParseError(TurnParseErrorKind kind, std::string block, const std::string& message);
    TurnParseErrorKind kind() const noexcept { return kind_; }
    const std::string& block() const noexcept { return block_; }

private:
    TurnParseErrorKind kind_;
    std::string block_;
};

/// Exactly one each of [REASONING]..[/REASONING], [RESPONSE]..[/RESPONSE],
/// [MACHINE_OUTPUT]..[/MACHINE_OUTPUT], in that order, tags matched
/// case-sensitively. Block bodies are trimmed.
GuidanceTurn parse_guidance_response(std::string_view raw);

/// Inverse of parse_guidance_response for turns whose texts are trimmed and
/// free of block tags.
std::string format_guidance_response(const GuidanceTurn& turn);

struct ResolvedHighlight {
    Highlight highlight;
    NodePath path;
    const AccessibilityNode* node = nullptr;
};

class UnknownPrivyId : public Error {
public:
    explicit UnknownPrivyId(std::vector<std::string> ids);
    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    std::vector<std::string> ids_;
};

/// All-or-nothing: a single unknown id fails the whole turn.
std::vector<ResolvedHighlight> resolve_highlights(const GuidanceTurn& turn, const AccessibilitySnapshot& snapshot);

// ---------------------------------------------------------------------------
// Strategies

enum class Strategy { link, email, navigation };

std::string to_string(Strategy s);

Strategy select_strategy(const rights::Right& right);

/// Deterministic presentation of a direct link; throws ContractViolation when
/// the action value is not an http(s) URL.
GuidanceTurn render_link_guidance(const rights::Right& right, const std::string& site_url = {});

struct EmailDraft {
    std::string to;
    std::string subject;
    std::string body;

    friend bool operator==(const EmailDraft&, const EmailDraft&) = default;
};

nlohmann::json to_json(const EmailDraft& draft);

struct UserHints {
    std::optional<std::string> full_name;
    std::optional<std::string> account_email;
    std::optional<std::string> account_id;
    std::optional<std::string> state_of_residence;
};

EmailDraft compose_email_template(const rights::Right& right, const std::string& site, const UserHints& hints = {});

/// Optional rewrite of the body by a backend. The draft is kept unchanged
/// when the reply is unusable, drops a placeholder, or stops naming the site
/// or the right.
EmailDraft polish_email(const EmailDraft& draft, const rights::Right& right, const std::string& site,
                        llm::Provider& llm);

GuidanceTurn render_email_guidance(const rights::Right& right, const EmailDraft& draft);

// ---------------------------------------------------------------------------
// Sessions

enum class SessionStatus { active, completed, stuck, abandoned };

std::string to_string(SessionStatus s);
SessionStatus session_status_from_string(const std::string& s);

struct TurnRecord {
    std::string fingerprint;
    std::string url; // fragment stripped
    GuidanceTurn turn;
    std::vector<std::string> highlight_ids;     // sorted
    std::vector<std::string> highlight_targets; // sorted "role|name" of resolved nodes
};

struct SessionFallback {
    std::string policy_url;
    std::optional<std::string> email;
};

struct GuidanceSession {
    std::string id;
    std::string site;
    rights::Right right;
    Strategy strategy = Strategy::navigation;
    std::vector<TurnRecord> turns;
    SessionStatus status = SessionStatus::active;
    int step_count = 0;
    SessionFallback fallback;
    std::optional<EmailDraft> email_draft;
    std::string updated_at;
};

GuidanceSession start_session(std::string id, std::string site, rights::Right right, SessionFallback fallback);

/// Moves an active session to a terminal status and returns true. Terminal
/// statuses absorb: closing a closed session is a no-op returning false.
bool close_session(GuidanceSession& session, SessionStatus status);

nlohmann::json to_json(const TurnRecord& record);
TurnRecord turn_record_from_json(const nlohmann::json& j);
/// Full persisted form, reasoning included. Never sent to clients.
nlohmann::json to_storage_json(const GuidanceSession& session);
GuidanceSession session_from_storage_json(const nlohmann::json& j);

struct GuidanceOptions {
    size_t node_budget = 1500;
    size_t loop_window = 5;
    size_t history_turns = 3;
    double temperature = 0.3;
    int max_output = 2048;
};

extern const char* const navigation_system_prompt;

llm::ChatRequest build_navigation_prompt(const GuidanceSession& session, const AccessibilitySnapshot& snapshot,
                                         const GuidanceOptions& options = {});

TurnRecord observe_turn(const GuidanceTurn& turn, const AccessibilitySnapshot& snapshot,
                        const std::vector<ResolvedHighlight>& resolved);

enum class LoopVerdict { none, cycle };

/// Cycle when the incoming (fingerprint, suggestion) pair repeats one of the
/// last `window` turns, or when the URL returns to one visited within the
/// window while repeating that turn's suggestion. A suggestion repeats when
/// either its id multiset or its resolved-target multiset is equal and
/// non-empty.
LoopVerdict detect_loop(const GuidanceSession& session, const TurnRecord& incoming, size_t window = 5);

class TurnFailed : public Error {
public:
    TurnFailed(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

struct AdvanceResult {
    GuidanceTurn turn;
    std::vector<ResolvedHighlight> resolved;
    LoopVerdict loop = LoopVerdict::none;
};

/// One guidance step. Link and email sessions finish in a single turn.
/// Navigation sessions need a snapshot and a backend; a detected loop marks
/// the session stuck and the emitted turn points at the best fallback.
/// Parse and resolution failures get one retry with the error fed back;
/// after that TurnFailed is thrown ("stale_snapshot" for unresolvable ids,
/// "turn_failed" otherwise) and the session is left untouched.
AdvanceResult advance_session(GuidanceSession& session, const AccessibilitySnapshot* snapshot, llm::Provider* llm,
                              const GuidanceOptions& options = {}, const UserHints& hints = {});

/// Client-facing turn: {response_text, highlights[{label, privyId}], status}.
nlohmann::json to_wire(const GuidanceTurn& turn, SessionStatus status);

/// Client-facing session view without reasoning.
nlohmann::json to_wire(const GuidanceSession& session);

} // namespace rightpath::guidance
