#include "specfsm/fsm.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace specfsm {

std::string canonical_state_text(std::string_view raw) {
    return text::to_upper_ascii(text::normalize_whitespace(raw));
}

StateName::StateName(std::string_view raw) : value_(canonical_state_text(raw)) {
    if (value_.empty()) throw Error(ErrorKind::InvalidState, "empty state name");
}

std::string_view StateName::last_component() const noexcept {
    std::string_view v = value_;
    auto dot = v.rfind('.');
    return dot == std::string_view::npos ? v : v.substr(dot + 1);
}

StateDenylist::StateDenylist(const std::vector<std::string>& entries) {
    for (const auto& e : entries) entries_.insert(canonical_state_text(e));
}

const StateDenylist& StateDenylist::defaults() {
    static const StateDenylist list({"UNKNOWN", "UNDEFINED", "ANY STATE", "SOME STATE", "N/A", ""});
    return list;
}

bool StateDenylist::contains(std::string_view raw) const {
    return entries_.find(canonical_state_text(raw)) != entries_.end();
}

void Provenance::merge(const Provenance& other) {
    providers.insert(other.providers.begin(), other.providers.end());
    window_ids.insert(other.window_ids.begin(), other.window_ids.end());
    // An explicit copy outranks an inferred one.
    inferred = inferred && other.inferred;
}

bool Transition::same_tuple(const Transition& other) const noexcept {
    return from == other.from && to == other.to && condition == other.condition && action == other.action;
}

bool tuple_less(const Transition& a, const Transition& b) {
    return std::tie(a.from, a.to, a.condition, a.action) < std::tie(b.from, b.to, b.condition, b.action);
}

QualifiedState qualify_state(std::string_view candidate, const std::set<StateName>& catalog) {
    StateName name(candidate);
    if (catalog.contains(name)) return {name, true};

    std::vector<const StateName*> hits;
    for (const auto& entry : catalog) {
        if (entry.str() != entry.last_component() && entry.last_component() == name.str()) hits.push_back(&entry);
    }
    if (hits.size() == 1) return {*hits.front(), true};
    if (hits.size() > 1) {
        std::string list;
        for (const auto* h : hits) list += (list.empty() ? "" : ", ") + h->str();
        throw Error(ErrorKind::AmbiguousSubstate, "'" + name.str() + "' matches " + list);
    }
    return {name, false};
}

void Fsm::add_state(const StateName& name, bool initial, bool final) {
    auto& flags = states_[name];
    flags.initial = flags.initial || initial;
    flags.final = flags.final || final;
}

void Fsm::add_transition(Transition t, const StateDenylist& denylist) {
    for (const auto* s : {&t.from, &t.to}) {
        if (denylist.contains(s->str())) throw Error(ErrorKind::PseudoState, "'" + s->str() + "' is a pseudo-state");
    }
    states_.try_emplace(t.from);
    states_.try_emplace(t.to);
    for (auto& existing : transitions_) {
        if (existing.same_tuple(t)) {
            existing.provenance.merge(t.provenance);
            return;
        }
    }
    transitions_.push_back(std::move(t));
}

std::vector<Transition> sorted_transitions(const Fsm& fsm) {
    auto out = fsm.transitions();
    std::sort(out.begin(), out.end(), tuple_less);
    return out;
}

bool operator==(const Fsm& a, const Fsm& b) {
    return a.protocol_ == b.protocol_ && a.spec_version_ == b.spec_version_ && a.states_ == b.states_ &&
           sorted_transitions(a) == sorted_transitions(b);
}

nlohmann::json fsm_to_json(const Fsm& fsm) {
    auto states = nlohmann::json::array();
    for (const auto& [name, flags] : fsm.states()) {
        states.push_back({{"name", name.str()}, {"initial", flags.initial}, {"final", flags.final}});
    }
    auto transitions = nlohmann::json::array();
    for (const auto& t : sorted_transitions(fsm)) {
        transitions.push_back({
            {"from", t.from.str()},
            {"to", t.to.str()},
            {"condition", t.condition},
            {"action", t.action},
            {"votes", t.provenance.votes()},
            {"providers", t.provenance.providers},
            {"window_ids", t.provenance.window_ids},
            {"inferred", t.provenance.inferred},
        });
    }
    return {{"protocol", fsm.protocol()},
            {"spec_version", fsm.spec_version()},
            {"states", std::move(states)},
            {"transitions", std::move(transitions)}};
}

std::string export_json(const Fsm& fsm) { return fsm_to_json(fsm).dump(2) + "\n"; }

namespace {

template <typename T>
T field_or(const nlohmann::json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return it->get<T>();
}

}  // namespace

Fsm fsm_from_json(const nlohmann::json& j, const StateDenylist& denylist) {
    try {
        if (!j.is_object()) throw Error(ErrorKind::Schema, "FSM document must be an object");
        Fsm fsm(field_or<std::string>(j, "protocol", ""), field_or<std::string>(j, "spec_version", ""));
        for (const auto& s : j.at("states")) {
            fsm.add_state(StateName(s.at("name").get<std::string>()), field_or(s, "initial", false),
                          field_or(s, "final", false));
        }
        for (const auto& tj : j.at("transitions")) {
            Transition t{StateName(tj.at("from").get<std::string>()), StateName(tj.at("to").get<std::string>()),
                         field_or<std::string>(tj, "condition", ""), field_or<std::string>(tj, "action", ""), {}};
            t.provenance.providers = field_or<std::set<std::string>>(tj, "providers", {});
            t.provenance.window_ids = field_or<std::set<int>>(tj, "window_ids", {});
            t.provenance.inferred = field_or(tj, "inferred", false);
            fsm.add_transition(std::move(t), denylist);
        }
        return fsm;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed FSM JSON: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Schema) throw;
        throw Error(ErrorKind::Schema, e.what());
    }
}

Fsm import_json(std::string_view bytes, const StateDenylist& denylist) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("FSM file is not JSON: ") + e.what());
    }
    return fsm_from_json(j, denylist);
}

namespace {

std::string dot_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n' || c == '\r') {
            out.push_back(' ');
            continue;
        }
        out.push_back(c);
    }
    return out;
}

// Cuts at a UTF-8 boundary so the label never ends mid code point.
std::string truncate_label(const std::string& label, std::size_t limit) {
    if (label.size() <= limit) return label;
    std::size_t cut = limit - 3;
    while (cut > 0 && (static_cast<unsigned char>(label[cut]) & 0xC0) == 0x80) --cut;
    return label.substr(0, cut) + "...";
}

}  // namespace

std::string export_dot(const Fsm& fsm) {
    if (fsm.states().empty()) return "digraph { }\n";

    std::ostringstream out;
    out << "digraph {\n  rankdir=LR;\n";
    int start = 0;
    for (const auto& [name, flags] : fsm.states()) {
        out << "  \"" << dot_escape(name.str()) << "\" [shape=" << (flags.final ? "doublecircle" : "circle")
            << "];\n";
    }
    for (const auto& [name, flags] : fsm.states()) {
        if (!flags.initial) continue;
        out << "  \"__start" << start << "\" [shape=point, label=\"\"];\n";
        out << "  \"__start" << start << "\" -> \"" << dot_escape(name.str()) << "\";\n";
        ++start;
    }
    for (const auto& t : sorted_transitions(fsm)) {
        auto label = truncate_label(t.condition + " / " + t.action, kDotLabelLimit);
        out << "  \"" << dot_escape(t.from.str()) << "\" -> \"" << dot_escape(t.to.str()) << "\" [label=\""
            << dot_escape(label) << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace specfsm
