#include "specfsm/ensemble.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>
#include <unordered_map>

namespace specfsm {

void AlignmentParams::validate(int providers) const {
    if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorKind::Config, "theta must be in (0, 1]");
    const int t = threshold_for(providers);
    if (t < 1 || t > std::max(providers, 1)) {
        throw Error(ErrorKind::Config, "vote threshold " + std::to_string(t) + " outside [1, " +
                                           std::to_string(providers) + "]");
    }
}

std::vector<std::string> span_tokens(std::string_view span) {
    std::vector<std::string> out;
    for (auto word : text::split_words(span)) {
        std::string token;
        token.reserve(word.size());
        for (char c : word) {
            auto u = static_cast<unsigned char>(c);
            if (u < 0x80 && std::ispunct(u)) continue;
            token.push_back(static_cast<char>(u < 0x80 ? std::tolower(u) : u));
        }
        if (!token.empty()) out.push_back(std::move(token));
    }
    return out;
}

double span_overlap(std::string_view a, std::string_view b) {
    const auto ta = span_tokens(a);
    const auto tb = span_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    std::unordered_map<std::string_view, int> counts;
    for (const auto& t : ta) ++counts[t];
    std::size_t shared = 0;
    for (const auto& t : tb) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++shared;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(std::min(ta.size(), tb.size()));
}

bool transitions_aligned(const TupleView& a, const TupleView& b, double theta) {
    return a.from == b.from && a.to == b.to && span_overlap(a.action, b.action) >= theta &&
           span_overlap(a.condition, b.condition) >= theta;
}

double pair_score(const TupleView& a, const TupleView& b) {
    return span_overlap(a.action, b.action) + span_overlap(a.condition, b.condition);
}

namespace {

auto order_key(const CandidateTransition& c) { return std::tie(c.window_id, c.from, c.to, c.condition, c.action); }

struct Item {
    std::size_t provider;
    const CandidateTransition* candidate;
};

}  // namespace

std::vector<TransitionCluster> cluster_candidates(const std::vector<CandidateSet>& per_provider,
                                                  const AlignmentParams& params) {
    std::vector<const CandidateSet*> sets;
    for (const auto& s : per_provider) sets.push_back(&s);
    std::stable_sort(sets.begin(), sets.end(),
                     [](const CandidateSet* a, const CandidateSet* b) { return a->provider < b->provider; });

    // items grouped by provider, each group in canonical candidate order
    std::vector<std::vector<Item>> by_provider(sets.size());
    for (std::size_t p = 0; p < sets.size(); ++p) {
        for (const auto& c : sets[p]->transitions) by_provider[p].push_back({p, &c});
        std::stable_sort(by_provider[p].begin(), by_provider[p].end(), [](const Item& a, const Item& b) {
            return order_key(*a.candidate) < order_key(*b.candidate);
        });
    }
    std::vector<std::vector<char>> used(sets.size());
    for (std::size_t p = 0; p < sets.size(); ++p) used[p].assign(by_provider[p].size(), 0);

    std::vector<TransitionCluster> clusters;
    for (std::size_t p = 0; p < sets.size(); ++p) {
        for (std::size_t i = 0; i < by_provider[p].size(); ++i) {
            if (used[p][i]) continue;
            used[p][i] = 1;
            const CandidateTransition& seed = *by_provider[p][i].candidate;
            std::vector<const Item*> members{&by_provider[p][i]};

            for (std::size_t q = 0; q < sets.size(); ++q) {
                if (q == p || sets[q]->provider == sets[p]->provider) continue;
                std::optional<std::size_t> best;
                double best_score = -1.0;
                for (std::size_t j = 0; j < by_provider[q].size(); ++j) {
                    if (used[q][j]) continue;
                    const auto& cand = *by_provider[q][j].candidate;
                    if (!transitions_aligned(view_of(seed), view_of(cand), params.theta)) continue;
                    double score = pair_score(view_of(seed), view_of(cand));
                    if (score > best_score) {
                        best_score = score;
                        best = j;
                    }
                }
                if (best) {
                    used[q][*best] = 1;
                    members.push_back(&by_provider[q][*best]);
                }
            }

            // Medoid among members that align with every other member.
            const Item* rep = nullptr;
            double rep_score = -1.0;
            for (const Item* m : members) {
                bool aligned_with_all = true;
                double total = 0.0;
                for (const Item* o : members) {
                    if (o == m) continue;
                    if (!transitions_aligned(view_of(*m->candidate), view_of(*o->candidate), params.theta)) {
                        aligned_with_all = false;
                        break;
                    }
                    total += pair_score(view_of(*m->candidate), view_of(*o->candidate));
                }
                if (!aligned_with_all) continue;
                // members are in provider-name order, so strict > keeps the tie rule
                if (total > rep_score) {
                    rep_score = total;
                    rep = m;
                }
            }

            TransitionCluster cluster;
            std::set<std::string> providers;
            for (const Item* m : members) {
                cluster.members.push_back({sets[m->provider]->provider, *m->candidate});
                providers.insert(sets[m->provider]->provider);
            }
            cluster.representative = *rep->candidate;
            cluster.votes = static_cast<int>(providers.size());
            clusters.push_back(std::move(cluster));
        }
    }
    return clusters;
}

StateVotes tally_state_votes(const std::vector<CandidateSet>& per_provider) {
    StateVotes votes;
    for (const auto& set : per_provider) {
        for (const auto& s : set.states) {
            votes.named[s.name].insert(set.provider);
            if (s.initial) votes.initial[s.name].insert(set.provider);
            if (s.final) votes.final[s.name].insert(set.provider);
        }
    }
    return votes;
}

Fsm majority_vote(const std::vector<TransitionCluster>& clusters, const AlignmentParams& params,
                  const StateVotes& state_votes, int providers, const std::string& protocol,
                  const std::string& spec_version, const StateDenylist& denylist) {
    params.validate(providers);
    const auto threshold = static_cast<std::size_t>(params.threshold_for(providers));
    Fsm fsm(protocol, spec_version);

    auto flag_votes = [](const std::map<std::string, std::set<std::string>>& m, const std::string& name) {
        auto it = m.find(name);
        return it == m.end() ? std::size_t{0} : it->second.size();
    };

    for (const auto& [name, who] : state_votes.named) {
        if (who.size() < threshold || denylist.contains(name) || text::trim(name).empty()) continue;
        fsm.add_state(StateName(name), flag_votes(state_votes.initial, name) >= threshold,
                      flag_votes(state_votes.final, name) >= threshold);
    }

    for (const auto& c : clusters) {
        if (static_cast<std::size_t>(c.votes) < threshold) continue;
        const auto& rep = c.representative;
        if (text::trim(rep.from).empty() || text::trim(rep.to).empty() || denylist.contains(rep.from) ||
            denylist.contains(rep.to)) {
            continue;
        }
        Transition t{StateName(rep.from), StateName(rep.to), rep.condition, rep.action, {}};
        t.provenance.inferred = true;
        for (const auto& m : c.members) {
            t.provenance.providers.insert(m.provider);
            t.provenance.window_ids.insert(m.candidate.window_id);
            t.provenance.inferred = t.provenance.inferred && m.candidate.inferred;
        }
        fsm.add_transition(std::move(t), denylist);
    }

    // Endpoints added above carry no flags; apply any flag votes they earned.
    for (const auto& [name, flags] : std::map(fsm.states())) {
        fsm.add_state(name, flag_votes(state_votes.initial, name.str()) >= threshold,
                      flag_votes(state_votes.final, name.str()) >= threshold);
    }
    return fsm;
}

Fsm ensemble_fsm(const std::vector<CandidateSet>& per_provider, const AlignmentParams& params,
                 const StateDenylist& denylist) {
    const int k = static_cast<int>(per_provider.size());
    params.validate(k);
    std::vector<const CandidateSet*> sorted;
    for (const auto& s : per_provider) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const CandidateSet* a, const CandidateSet* b) { return a->provider < b->provider; });
    std::string protocol;
    std::string version;
    for (const auto* s : sorted) {
        if (protocol.empty()) protocol = s->protocol;
        if (version.empty()) version = s->spec_version;
    }
    auto clusters = cluster_candidates(per_provider, params);
    return majority_vote(clusters, params, tally_state_votes(per_provider), k, protocol, version, denylist);
}

}  // namespace specfsm
