#pragma once

#include "specfsm/error.hpp"
#include "specfsm/fsm.hpp"
#include "specfsm/preproc.hpp"
#include "specfsm/prompting.hpp"
#include "specfsm/providers.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace specfsm {

struct CandidateState {
    std::string name;  // canonical and, after the state phase, qualified
    bool initial = false;
    bool final = false;
    std::string evidence;
    int window_id = -1;
    std::string provider;

    friend bool operator==(const CandidateState&, const CandidateState&) = default;
};

struct CandidateTransition {
    std::string from_raw;
    std::string to_raw;
    std::string from;  // resolved through qualify_state
    std::string to;
    std::string condition;
    std::string action;
    bool inferred = false;
    int window_id = -1;
    std::string provider;
    bool from_in_catalog = false;
    bool to_in_catalog = false;
    bool ambiguous = false;  // an endpoint matched several catalog substates

    friend bool operator==(const CandidateTransition&, const CandidateTransition&) = default;
};

struct ParseFailure {
    int window_id = -1;
    std::string reason;

    friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

struct DroppedCandidate {
    int window_id = -1;
    std::string phase;
    std::string reason;
    std::string detail;

    friend bool operator==(const DroppedCandidate&, const DroppedCandidate&) = default;
};

struct CandidateSet {
    std::string provider;
    std::string protocol;
    std::string spec_version;
    std::vector<CandidateState> states;
    std::vector<CandidateTransition> transitions;
    std::vector<ParseFailure> parse_failures;
    std::vector<DroppedCandidate> dropped;
    /// Elements parsed from model output before any filtering.
    std::size_t raw_state_count = 0;
    std::size_t raw_transition_count = 0;

    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

void to_json(nlohmann::json& j, const CandidateSet& c);
void from_json(const nlohmann::json& j, CandidateSet& c);

struct ParsedOutput {
    std::vector<CandidateState> states;
    std::vector<CandidateTransition> transitions;
    std::vector<ParseFailure> failures;
    /// Array elements seen, valid or not.
    std::size_t elements = 0;
};

/// Finds the first top-level JSON array in a model response (prose and code
/// fences around it are tolerated), validates each element against the phase
/// schema and reports, never throws.
ParsedOutput parse_model_output(std::string_view response_text, Phase phase, int window_id = -1,
                                const std::string& provider = {});

struct ExtractionOptions {
    const TemplateSet* templates = &TemplateSet::builtin();
    const SectionIndex* index = nullptr;  // cross-reference lookup; none when null
    ContextPolicy context;
    ReferencePolicy references;
    StateDenylist denylist = StateDenylist::defaults();
};

struct StatePhaseResult {
    std::set<StateName> catalog;
    std::vector<CandidateState> raw;  // surviving candidates, names qualified
    std::vector<ParseFailure> failures;
    std::vector<DroppedCandidate> dropped;
    std::size_t raw_count = 0;
};

/// Sequential over windows so each prompt carries the states found earlier.
/// Pseudo-states and empty names are dropped and reported; abbreviated
/// substates are expanded against the dotted names found by the phase.
StatePhaseResult run_state_phase(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                 ChatProvider& provider, ExchangeLog& log, const ExtractionOptions& options = {});

struct TransitionPhaseResult {
    std::vector<CandidateTransition> transitions;
    std::vector<ParseFailure> failures;
    std::vector<DroppedCandidate> dropped;
    std::size_t raw_count = 0;
};

/// Sequential over windows (context threading). Drops candidates whose
/// non-empty condition/action is not a whitespace-normalized span of the
/// window, and inferred candidates with an endpoint outside the catalog.
/// Throws Error(EmptyCatalog) for an empty catalog.
TransitionPhaseResult run_transition_phase(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                           const std::set<StateName>& catalog, ChatProvider& provider,
                                           ExchangeLog& log, const ExtractionOptions& options = {});

struct PostprocessResult {
    std::vector<CandidateTransition> survivors;
    std::vector<DroppedCandidate> dropped;
};

/// Normalizes span whitespace, removes pseudo-state or empty endpoints and
/// exact duplicates within a provider (the earliest window survives).
PostprocessResult postprocess(std::vector<CandidateTransition> candidates,
                              const StateDenylist& denylist = StateDenylist::defaults());

/// Both phases plus post-processing for one provider.
CandidateSet extract_candidates(const std::vector<Window>& windows, const ProtocolProfile& profile,
                                const std::string& spec_version, ChatProvider& provider, ExchangeLog& log,
                                const ExtractionOptions& options = {});

struct ProviderFailure {
    std::string provider;
    ErrorKind kind;
    std::string message;
};

struct ExtractionRun {
    std::vector<CandidateSet> sets;  // ordered by provider name
    std::vector<ProviderFailure> failures;
};

/// Runs every provider on its own thread; a provider that fails hard is
/// reported in `failures` while the others complete.
ExtractionRun run_extraction(const std::vector<std::shared_ptr<ChatProvider>>& providers,
                             const std::vector<Window>& windows, const ProtocolProfile& profile,
                             const std::string& spec_version, ExchangeLog& log, const ExtractionOptions& options = {});

}  // namespace specfsm
