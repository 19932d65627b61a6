#pragma once

#include <json.hpp>

#include <compare>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace specfsm {

/// Uppercase, whitespace-collapsed form of a state identifier. Hyphens and
/// dots are kept so "5gmm-registered.plmn-search" becomes
/// "5GMM-REGISTERED.PLMN-SEARCH". May return an empty string.
std::string canonical_state_text(std::string_view raw);

class StateName {
public:
    /// Throws Error(InvalidState) when the canonical form is empty.
    explicit StateName(std::string_view raw);

    const std::string& str() const noexcept { return value_; }
    std::string_view last_component() const noexcept;

    friend auto operator<=>(const StateName&, const StateName&) = default;
    friend bool operator==(const StateName&, const StateName&) = default;

private:
    std::string value_;
};

/// Pseudo-state names ("Unknown", "any state", ...) that never enter Q.
class StateDenylist {
public:
    StateDenylist() = default;
    explicit StateDenylist(const std::vector<std::string>& entries);

    static const StateDenylist& defaults();

    bool contains(std::string_view raw) const;
    std::vector<std::string> entries() const { return {entries_.begin(), entries_.end()}; }

private:
    std::set<std::string, std::less<>> entries_;
};

struct Provenance {
    std::set<std::string> providers;
    std::set<int> window_ids;
    bool inferred = false;

    int votes() const noexcept { return static_cast<int>(providers.size()); }
    void merge(const Provenance& other);

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Transition {
    StateName from;
    StateName to;
    std::string condition;
    std::string action;
    Provenance provenance;

    /// (from, to, condition, action): the identity used for dedup and ordering.
    bool same_tuple(const Transition& other) const noexcept;
    friend bool operator==(const Transition&, const Transition&) = default;
};

bool tuple_less(const Transition& a, const Transition& b);

struct StateFlags {
    bool initial = false;
    bool final = false;

    friend bool operator==(const StateFlags&, const StateFlags&) = default;
};

struct QualifiedState {
    StateName name;
    bool in_catalog = false;
};

/// Resolves a raw state mention against the catalog: exact match, then unique
/// final-dotted-component match ("PLMN-SEARCH" -> "5GMM-REGISTERED.PLMN-SEARCH"),
/// else the canonical candidate flagged out-of-catalog. Throws
/// Error(AmbiguousSubstate) when the suffix matches two or more entries and
/// Error(InvalidState) when the candidate is blank.
QualifiedState qualify_state(std::string_view candidate, const std::set<StateName>& catalog);

/// The quintuple: Q with q0/F flags, and delta as (condition, action)-labelled edges.
class Fsm {
public:
    Fsm() = default;
    Fsm(std::string protocol, std::string spec_version)
        : protocol_(std::move(protocol)), spec_version_(std::move(spec_version)) {}

    const std::string& protocol() const noexcept { return protocol_; }
    const std::string& spec_version() const noexcept { return spec_version_; }
    const std::map<StateName, StateFlags>& states() const noexcept { return states_; }
    const std::vector<Transition>& transitions() const noexcept { return transitions_; }

    /// Inserts the state if absent; flags are OR-ed into existing ones.
    void add_state(const StateName& name, bool initial = false, bool final = false);

    /// Inserts t, or merges its provenance into an exact duplicate. Endpoints
    /// are auto-inserted with both flags false. Throws Error(PseudoState) for
    /// a denylisted endpoint.
    void add_transition(Transition t, const StateDenylist& denylist = StateDenylist::defaults());

    /// Order-insensitive comparison over transitions.
    friend bool operator==(const Fsm& a, const Fsm& b);

private:
    std::string protocol_;
    std::string spec_version_;
    std::map<StateName, StateFlags> states_;
    std::vector<Transition> transitions_;
};

/// Transitions sorted by (from, to, condition, action).
std::vector<Transition> sorted_transitions(const Fsm& fsm);

nlohmann::json fsm_to_json(const Fsm& fsm);
/// Sorted keys, lexicographic states, tuple-ordered transitions; byte-stable.
std::string export_json(const Fsm& fsm);
/// Throws Error(Schema) on malformed input.
Fsm fsm_from_json(const nlohmann::json& j, const StateDenylist& denylist = StateDenylist::defaults());
Fsm import_json(std::string_view bytes, const StateDenylist& denylist = StateDenylist::defaults());

inline constexpr std::size_t kDotLabelLimit = 60;

std::string export_dot(const Fsm& fsm);

}  // namespace specfsm
