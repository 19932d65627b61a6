#pragma once

#include "specfsm/fsm.hpp"
#include "specfsm/preproc.hpp"

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace specfsm {

enum class ProtocolStyle { StateOriented, ProcedureOriented };

std::string_view to_string(ProtocolStyle style);
/// Accepts "state_oriented" / "procedure_oriented"; throws Error(Config) otherwise.
ProtocolStyle parse_protocol_style(std::string_view s);

struct ProtocolProfile {
    std::string protocol;
    ProtocolStyle style = ProtocolStyle::StateOriented;
    std::vector<std::string> known_prefixes;
    std::vector<std::string> layer_tags;
};

enum class Phase { StateExtraction, TransitionExtraction };

std::string_view to_string(Phase phase);

struct ResolvedReference {
    std::string section_number;
    std::string excerpt;  // empty when the section is not in the index

    friend bool operator==(const ResolvedReference&, const ResolvedReference&) = default;
};

struct PromptBundle {
    Phase phase = Phase::StateExtraction;
    int window_id = 0;
    std::string system_text;
    std::string user_text;
    std::string context_digest;
    std::vector<ResolvedReference> resolved_refs;

    /// The exact bytes that are hashed for replay: system + "\n" + user.
    std::string hashed_text() const { return system_text + "\n" + user_text; }

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct ContextPolicy {
    std::size_t word_budget = 400;
    std::size_t tail_k = 10;
};

using StatePair = std::pair<StateName, StateName>;

/// Carried history for the next window: states seen so far, the most recent
/// transition endpoints and an optional free-form summary line.
struct ContextDigest {
    std::vector<StateName> prior_states;
    std::deque<StatePair> prior_tail;
    std::string prior_summary;

    bool empty() const noexcept { return prior_states.empty() && prior_tail.empty() && prior_summary.empty(); }
    /// Words of the rendered digest, labels included; 0 when empty.
    std::size_t word_count() const;
    std::string render() const;
};

/// Appends unseen states and the new transition endpoints, keeps the last
/// tail_k pairs, then evicts oldest-first (summary, states, tail) until the
/// word budget holds.
ContextDigest update_context(ContextDigest ctx, std::span<const StateName> accepted_states,
                             std::span<const StatePair> accepted_transitions, const ContextPolicy& policy = {});

/// Section number -> section text, built from one or more section trees.
/// The first document to define a number wins.
class SectionIndex {
public:
    static SectionIndex from_tree(const SectionNode& root);
    void add_tree(const SectionNode& root);
    std::optional<std::string_view> find(std::string_view number) const;
    std::size_t size() const noexcept { return sections_.size(); }

private:
    std::map<std::string, std::string, std::less<>> sections_;
};

struct ReferencePolicy {
    std::size_t words_per_reference = 200;
    std::size_t max_references = 3;
};

/// Finds "subclause X.Y", "clause X.Y", "section X.Y" and "annex X" mentions
/// in order of appearance, skipping sections the window already contains, and
/// returns up to max_references excerpts. Unknown sections yield an empty
/// excerpt and a warning.
std::vector<ResolvedReference> resolve_cross_references(const Window& window, const SectionIndex& index,
                                                        const ReferencePolicy& policy = {});

const std::map<std::string, std::string, std::less<>>& builtin_template_texts();

/// The four prompt templates. Placeholders use {{NAME}}; known names are
/// PROTOCOL, SECTIONS, PREFIXES, CATALOG, CONTEXT, REFERENCES, WINDOW_TEXT.
class TemplateSet {
public:
    static constexpr std::string_view kSystem = "system";
    static constexpr std::string_view kStateStateOriented = "state_state_oriented";
    static constexpr std::string_view kStateProcedureOriented = "state_procedure_oriented";
    static constexpr std::string_view kTransition = "transition";

    static const TemplateSet& builtin();
    /// Reads <name>.txt for every template; throws Error(Config) if one is missing.
    static TemplateSet load(const std::filesystem::path& dir);

    const std::string& text(std::string_view name) const;
    /// Single pass substitution; substituted values are never rescanned.
    std::string render(std::string_view name, const std::map<std::string, std::string, std::less<>>& values) const;

private:
    std::map<std::string, std::string, std::less<>> texts_;
};

/// Word count of a template with its placeholders removed.
std::size_t template_fixed_words(const TemplateSet& templates, std::string_view name);

PromptBundle build_state_prompt(const Window& window, const ProtocolProfile& profile, const ContextDigest& ctx,
                                const TemplateSet& templates = TemplateSet::builtin(),
                                std::vector<ResolvedReference> refs = {});

/// Throws Error(EmptyCatalog) when the catalog is empty.
PromptBundle build_transition_prompt(const Window& window, const ProtocolProfile& profile,
                                     const std::set<StateName>& catalog, const ContextDigest& ctx,
                                     const TemplateSet& templates = TemplateSet::builtin(),
                                     std::vector<ResolvedReference> refs = {});

std::string render_references(const std::vector<ResolvedReference>& refs);
std::string render_catalog(const std::set<StateName>& catalog);

}  // namespace specfsm
