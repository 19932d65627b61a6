#pragma once

#include "specfsm/extract.hpp"
#include "specfsm/fsm.hpp"

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace specfsm {

inline constexpr double kDefaultTheta = 0.75;

struct AlignmentParams {
    double theta = kDefaultTheta;
    /// 0 selects the simple majority floor(k/2)+1 of k providers.
    int vote_threshold = 0;

    static int majority(int providers) noexcept { return providers / 2 + 1; }
    int threshold_for(int providers) const noexcept { return vote_threshold > 0 ? vote_threshold : majority(providers); }
    /// Throws Error(Config) unless 0 < theta <= 1 and 1 <= threshold <= k.
    void validate(int providers) const;
};

/// Case-folded, punctuation-stripped whitespace tokens of a span.
std::vector<std::string> span_tokens(std::string_view span);

/// |multiset intersection| / min(|a|, |b|) over span_tokens. Both empty gives
/// 1.0, exactly one empty gives 0.0.
double span_overlap(std::string_view a, std::string_view b);

struct TupleView {
    std::string_view from;
    std::string_view to;
    std::string_view condition;
    std::string_view action;
};

inline TupleView view_of(const CandidateTransition& t) { return {t.from, t.to, t.condition, t.action}; }
inline TupleView view_of(const Transition& t) { return {t.from.str(), t.to.str(), t.condition, t.action}; }

/// Exact state equality on both endpoints and overlap >= theta on both the
/// action and the condition spans.
bool transitions_aligned(const TupleView& a, const TupleView& b, double theta);

/// Summed action + condition overlap; the ranking score for cluster joins,
/// medoids and evaluation matching.
double pair_score(const TupleView& a, const TupleView& b);

struct ClusterMember {
    std::string provider;
    CandidateTransition candidate;
};

struct TransitionCluster {
    std::vector<ClusterMember> members;
    CandidateTransition representative;
    int votes = 0;
};

/// Greedy seeded clustering in canonical order (providers by name, then
/// (window_id, from, to, condition, action)). Each cluster holds at most one
/// candidate per provider, every member aligns with the representative, and
/// the representative is the medoid by summed overlap.
std::vector<TransitionCluster> cluster_candidates(const std::vector<CandidateSet>& per_provider,
                                                  const AlignmentParams& params);

/// Per state name, the providers that named it / flagged it initial / final.
struct StateVotes {
    std::map<std::string, std::set<std::string>> named;
    std::map<std::string, std::set<std::string>> initial;
    std::map<std::string, std::set<std::string>> final;
};

StateVotes tally_state_votes(const std::vector<CandidateSet>& per_provider);

/// Keeps clusters with votes >= threshold, states named by >= threshold
/// providers plus accepted endpoints, and initial/final flags with >= threshold
/// votes.
Fsm majority_vote(const std::vector<TransitionCluster>& clusters, const AlignmentParams& params,
                  const StateVotes& state_votes, int providers, const std::string& protocol,
                  const std::string& spec_version, const StateDenylist& denylist = StateDenylist::defaults());

/// cluster_candidates + majority_vote with k = number of sets.
Fsm ensemble_fsm(const std::vector<CandidateSet>& per_provider, const AlignmentParams& params,
                 const StateDenylist& denylist = StateDenylist::defaults());

}  // namespace specfsm
