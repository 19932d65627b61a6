#include "specfsm/extract.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <future>
#include <tuple>

namespace specfsm {

// ---------------------------------------------------------------------------
// Candidate files

void to_json(nlohmann::json& j, const CandidateSet& c) {
    auto states = nlohmann::json::array();
    for (const auto& s : c.states) {
        states.push_back({{"name", s.name},
                          {"initial", s.initial},
                          {"final", s.final},
                          {"evidence", s.evidence},
                          {"window_id", s.window_id}});
    }
    auto transitions = nlohmann::json::array();
    for (const auto& t : c.transitions) {
        transitions.push_back({{"from_raw", t.from_raw},
                               {"to_raw", t.to_raw},
                               {"from", t.from},
                               {"to", t.to},
                               {"condition", t.condition},
                               {"action", t.action},
                               {"inferred", t.inferred},
                               {"window_id", t.window_id},
                               {"from_in_catalog", t.from_in_catalog},
                               {"to_in_catalog", t.to_in_catalog},
                               {"ambiguous", t.ambiguous}});
    }
    auto failures = nlohmann::json::array();
    for (const auto& f : c.parse_failures) failures.push_back({{"window_id", f.window_id}, {"reason", f.reason}});
    auto dropped = nlohmann::json::array();
    for (const auto& d : c.dropped) {
        dropped.push_back({{"window_id", d.window_id}, {"phase", d.phase}, {"reason", d.reason}, {"detail", d.detail}});
    }
    j = {{"provider", c.provider},
         {"protocol", c.protocol},
         {"spec_version", c.spec_version},
         {"states", std::move(states)},
         {"transitions", std::move(transitions)},
         {"parse_failures", std::move(failures)},
         {"dropped", std::move(dropped)},
         {"raw_state_count", c.raw_state_count},
         {"raw_transition_count", c.raw_transition_count}};
}

void from_json(const nlohmann::json& j, CandidateSet& c) {
    c.provider = j.at("provider").get<std::string>();
    c.protocol = j.value("protocol", "");
    c.spec_version = j.value("spec_version", "");
    c.states.clear();
    for (const auto& s : j.at("states")) {
        CandidateState cs;
        cs.name = s.at("name").get<std::string>();
        cs.initial = s.value("initial", false);
        cs.final = s.value("final", false);
        cs.evidence = s.value("evidence", "");
        cs.window_id = s.value("window_id", -1);
        cs.provider = c.provider;
        c.states.push_back(std::move(cs));
    }
    c.transitions.clear();
    for (const auto& t : j.at("transitions")) {
        CandidateTransition ct;
        ct.from = t.at("from").get<std::string>();
        ct.to = t.at("to").get<std::string>();
        ct.from_raw = t.value("from_raw", ct.from);
        ct.to_raw = t.value("to_raw", ct.to);
        ct.condition = t.value("condition", "");
        ct.action = t.value("action", "");
        ct.inferred = t.value("inferred", false);
        ct.window_id = t.value("window_id", -1);
        ct.from_in_catalog = t.value("from_in_catalog", false);
        ct.to_in_catalog = t.value("to_in_catalog", false);
        ct.ambiguous = t.value("ambiguous", false);
        ct.provider = c.provider;
        c.transitions.push_back(std::move(ct));
    }
    c.parse_failures.clear();
    for (const auto& f : j.value("parse_failures", nlohmann::json::array())) {
        c.parse_failures.push_back({f.value("window_id", -1), f.value("reason", "")});
    }
    c.dropped.clear();
    for (const auto& d : j.value("dropped", nlohmann::json::array())) {
        c.dropped.push_back({d.value("window_id", -1), d.value("phase", ""), d.value("reason", ""), d.value("detail", "")});
    }
    c.raw_state_count = j.value("raw_state_count", c.states.size());
    c.raw_transition_count = j.value("raw_transition_count", c.transitions.size());
}

// ---------------------------------------------------------------------------
// Parsing model output

namespace {

// End index (exclusive) of the bracketed value starting at `open`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            ++depth;
        } else if (c == ']' || c == '}') {
            if (--depth == 0) return c == ']' ? i + 1 : std::string_view::npos;
            if (depth < 0) return std::string_view::npos;
        }
    }
    return std::string_view::npos;
}

std::optional<nlohmann::json> first_json_array(std::string_view s, bool& saw_bracket) {
    saw_bracket = false;
    for (std::size_t pos = s.find('['); pos != std::string_view::npos; pos = s.find('[', pos + 1)) {
        saw_bracket = true;
        std::size_t end = balanced_end(s, pos);
        if (end == std::string_view::npos) continue;
        auto j = nlohmann::json::parse(s.substr(pos, end - pos), nullptr, /*allow_exceptions=*/false);
        if (!j.is_discarded() && j.is_array()) return j;
    }
    return std::nullopt;
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::string& error) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::string{};
    if (!it->is_string()) {
        error = std::string("field '") + key + "' is not a string";
        return std::nullopt;
    }
    return it->get<std::string>();
}

std::optional<bool> optional_bool(const nlohmann::json& obj, const char* key, std::string& error) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return false;
    if (!it->is_boolean()) {
        error = std::string("field '") + key + "' is not a boolean";
        return std::nullopt;
    }
    return it->get<bool>();
}

std::optional<std::string> required_string(const nlohmann::json& obj, const char* key, std::string& error) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        error = std::string("missing string field '") + key + "'";
        return std::nullopt;
    }
    return it->get<std::string>();
}

std::optional<CandidateState> state_from(const nlohmann::json& e, std::string& error) {
    if (!e.is_object()) {
        error = "element is not an object";
        return std::nullopt;
    }
    auto name = required_string(e, "name", error);
    if (!name) return std::nullopt;
    auto initial = optional_bool(e, "initial", error);
    if (!initial) return std::nullopt;
    auto final = optional_bool(e, "final", error);
    if (!final) return std::nullopt;
    auto evidence = optional_string(e, "evidence", error);
    if (!evidence) return std::nullopt;
    CandidateState s;
    s.name = *name;
    s.initial = *initial;
    s.final = *final;
    s.evidence = *evidence;
    return s;
}

std::optional<CandidateTransition> transition_from(const nlohmann::json& e, std::string& error) {
    if (!e.is_object()) {
        error = "element is not an object";
        return std::nullopt;
    }
    auto from = required_string(e, "from", error);
    if (!from) return std::nullopt;
    auto to = required_string(e, "to", error);
    if (!to) return std::nullopt;
    auto condition = optional_string(e, "condition", error);
    if (!condition) return std::nullopt;
    auto action = optional_string(e, "action", error);
    if (!action) return std::nullopt;
    auto inferred = optional_bool(e, "inferred", error);
    if (!inferred) return std::nullopt;
    if (text::trim(*condition).empty() && text::trim(*action).empty()) {
        error = "both condition and action are empty";
        return std::nullopt;
    }
    CandidateTransition t;
    t.from_raw = *from;
    t.to_raw = *to;
    t.condition = *condition;
    t.action = *action;
    t.inferred = *inferred;
    return t;
}

}  // namespace

ParsedOutput parse_model_output(std::string_view response_text, Phase phase, int window_id,
                                const std::string& provider) {
    ParsedOutput out;
    bool saw_bracket = false;
    std::optional<nlohmann::json> array;
    try {
        array = first_json_array(response_text, saw_bracket);
    } catch (const std::exception& e) {
        out.failures.push_back({window_id, std::string("unparseable output: ") + e.what()});
        return out;
    }
    if (!array) {
        out.failures.push_back(
            {window_id, saw_bracket ? "truncated or malformed JSON array" : "no JSON array in model output"});
        return out;
    }
    for (std::size_t i = 0; i < array->size(); ++i) {
        const auto& e = (*array)[i];
        ++out.elements;
        std::string error;
        if (phase == Phase::StateExtraction) {
            if (auto s = state_from(e, error)) {
                s->window_id = window_id;
                s->provider = provider;
                out.states.push_back(std::move(*s));
                continue;
            }
        } else if (auto t = transition_from(e, error)) {
            t->window_id = window_id;
            t->provider = provider;
            out.transitions.push_back(std::move(*t));
            continue;
        }
        out.failures.push_back({window_id, "element " + std::to_string(i) + ": " + error});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Phases

namespace {

std::vector<ResolvedReference> references_for(const Window& w, const ExtractionOptions& options) {
    if (options.index == nullptr) return {};
    return resolve_cross_references(w, *options.index, options.references);
}

std::string describe(const CandidateTransition& t) {
    return t.from_raw + " -> " + t.to_raw + " | " + t.condition + " / " + t.action;
}

}  // namespace

StatePhaseResult run_state_phase(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                 ChatProvider& provider, ExchangeLog& log, const ExtractionOptions& options) {
    StatePhaseResult result;
    ContextDigest ctx;
    std::vector<CandidateState> kept;
    for (const auto& w : windows) {
        auto bundle = build_state_prompt(w, profile, ctx, *options.templates, references_for(w, options));
        auto ex = provider.complete(bundle, log);
        auto parsed = parse_model_output(ex.response_text, Phase::StateExtraction, w.window_id, provider.name());
        result.raw_count += parsed.states.size();
        result.failures.insert(result.failures.end(), parsed.failures.begin(), parsed.failures.end());

        std::vector<StateName> accepted;
        for (auto& s : parsed.states) {
            const std::string canonical = canonical_state_text(s.name);
            if (canonical.empty()) {
                result.dropped.push_back({w.window_id, "state", "empty state", s.name});
                continue;
            }
            if (options.denylist.contains(canonical)) {
                result.dropped.push_back({w.window_id, "state", "pseudo-state", s.name});
                continue;
            }
            s.name = canonical;
            if (!text::contains_normalized(w.text, s.evidence)) s.evidence.clear();
            accepted.emplace_back(canonical);
            kept.push_back(std::move(s));
        }
        ctx = update_context(std::move(ctx), accepted, {}, options.context);
    }

    // Expand abbreviated substates against the dotted names this phase found.
    std::set<StateName> dotted;
    for (const auto& s : kept) {
        if (s.name.find('.') != std::string::npos) dotted.emplace(s.name);
    }
    for (auto& s : kept) {
        if (s.name.find('.') == std::string::npos && !dotted.empty()) {
            try {
                auto q = qualify_state(s.name, dotted);
                if (q.in_catalog) s.name = q.name.str();
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::AmbiguousSubstate) throw;
                spdlog::info("{}: window {}: {}", provider.name(), s.window_id, e.what());
            }
        }
        result.catalog.emplace(s.name);
    }
    result.raw = std::move(kept);
    return result;
}

TransitionPhaseResult run_transition_phase(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                           const std::set<StateName>& catalog, ChatProvider& provider,
                                           ExchangeLog& log, const ExtractionOptions& options) {
    if (catalog.empty()) throw Error(ErrorKind::EmptyCatalog, provider.name() + ": state catalog is empty");

    TransitionPhaseResult result;
    ContextDigest ctx;
    for (const auto& w : windows) {
        auto bundle = build_transition_prompt(w, profile, catalog, ctx, *options.templates, references_for(w, options));
        auto ex = provider.complete(bundle, log);
        auto parsed = parse_model_output(ex.response_text, Phase::TransitionExtraction, w.window_id, provider.name());
        result.raw_count += parsed.transitions.size();
        result.failures.insert(result.failures.end(), parsed.failures.begin(), parsed.failures.end());

        std::vector<StateName> seen_states;
        std::vector<StatePair> accepted_pairs;
        for (auto& t : parsed.transitions) {
            bool blank_endpoint = false;
            for (auto [raw, resolved, in_catalog] : {std::tuple{&t.from_raw, &t.from, &t.from_in_catalog},
                                                     std::tuple{&t.to_raw, &t.to, &t.to_in_catalog}}) {
                try {
                    auto q = qualify_state(*raw, catalog);
                    *resolved = q.name.str();
                    *in_catalog = q.in_catalog;
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::AmbiguousSubstate) {
                        *resolved = canonical_state_text(*raw);
                        t.ambiguous = true;
                    } else {
                        blank_endpoint = true;  // empty name; removed by postprocess
                        resolved->clear();
                    }
                }
            }

            if (!text::contains_normalized(w.text, t.condition)) {
                result.dropped.push_back({w.window_id, "transition", "condition not found in window", describe(t)});
                continue;
            }
            if (!text::contains_normalized(w.text, t.action)) {
                result.dropped.push_back({w.window_id, "transition", "action not found in window", describe(t)});
                continue;
            }
            if (t.inferred && !(t.from_in_catalog && t.to_in_catalog && !t.ambiguous)) {
                result.dropped.push_back(
                    {w.window_id, "transition", "inferred transition with out-of-catalog endpoint", describe(t)});
                continue;
            }
            if (!blank_endpoint && !options.denylist.contains(t.from) && !options.denylist.contains(t.to)) {
                seen_states.emplace_back(t.from);
                seen_states.emplace_back(t.to);
                accepted_pairs.emplace_back(StateName(t.from), StateName(t.to));
            }
            result.transitions.push_back(std::move(t));
        }
        ctx = update_context(std::move(ctx), seen_states, accepted_pairs, options.context);
    }
    return result;
}

PostprocessResult postprocess(std::vector<CandidateTransition> candidates, const StateDenylist& denylist) {
    PostprocessResult out;
    std::vector<CandidateTransition> valid;
    for (auto& c : candidates) {
        c.condition = text::normalize_whitespace(c.condition);
        c.action = text::normalize_whitespace(c.action);
        if (text::trim(c.from).empty() || text::trim(c.to).empty()) {
            out.dropped.push_back({c.window_id, "postprocess", "empty endpoint", describe(c)});
            continue;
        }
        if (denylist.contains(c.from) || denylist.contains(c.to)) {
            out.dropped.push_back({c.window_id, "postprocess", "pseudo-state endpoint", describe(c)});
            continue;
        }
        valid.push_back(std::move(c));
    }

    auto key = [](const CandidateTransition& c) { return std::tie(c.provider, c.from, c.to, c.condition, c.action); };
    std::vector<std::size_t> keep(valid.size(), 1);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t j = i + 1; j < valid.size(); ++j) {
            if (!keep[j] || key(valid[i]) != key(valid[j])) continue;
            std::size_t loser = valid[j].window_id < valid[i].window_id ? i : j;
            keep[loser] = 0;
            out.dropped.push_back({valid[loser].window_id, "postprocess", "duplicate within provider", describe(valid[loser])});
            if (loser == i) break;
        }
    }
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (keep[i]) out.survivors.push_back(std::move(valid[i]));
    }
    return out;
}

CandidateSet extract_candidates(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                const std::string& spec_version, ChatProvider& provider, ExchangeLog& log,
                                const ExtractionOptions& options) {
    CandidateSet set;
    set.provider = provider.name();
    set.protocol = profile.protocol;
    set.spec_version = spec_version;

    auto states = run_state_phase(windows, profile, provider, log, options);
    set.states = std::move(states.raw);
    set.raw_state_count = states.raw_count;
    set.parse_failures = std::move(states.failures);
    set.dropped = std::move(states.dropped);

    if (states.catalog.empty()) {
        set.parse_failures.push_back({-1, "empty state catalog; transition phase skipped"});
        return set;
    }

    auto transitions = run_transition_phase(windows, profile, states.catalog, provider, log, options);
    set.raw_transition_count = transitions.raw_count;
    set.parse_failures.insert(set.parse_failures.end(), transitions.failures.begin(), transitions.failures.end());
    set.dropped.insert(set.dropped.end(), transitions.dropped.begin(), transitions.dropped.end());

    auto post = postprocess(std::move(transitions.transitions), options.denylist);
    set.transitions = std::move(post.survivors);
    set.dropped.insert(set.dropped.end(), post.dropped.begin(), post.dropped.end());
    return set;
}

ExtractionRun run_extraction(const std::vector<std::shared_ptr<ChatProvider>>& providers,
                             const std::vector<Window>& windows, const ProtocolProfile& profile,
                             const std::string& spec_version, ExchangeLog& log, const ExtractionOptions& options) {
    std::vector<std::future<CandidateSet>> futures;
    futures.reserve(providers.size());
    for (const auto& p : providers) {
        futures.push_back(std::async(std::launch::async, [&, p] {
            return extract_candidates(windows, profile, spec_version, *p, log, options);
        }));
    }
    ExtractionRun run;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            run.sets.push_back(futures[i].get());
        } catch (const Error& e) {
            spdlog::error("provider {} failed: {}", providers[i]->name(), e.what());
            run.failures.push_back({providers[i]->name(), e.kind(), e.what()});
        }
    }
    std::sort(run.sets.begin(), run.sets.end(),
              [](const CandidateSet& a, const CandidateSet& b) { return a.provider < b.provider; });
    return run;
}

}  // namespace specfsm
