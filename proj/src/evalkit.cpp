#include "specfsm/evalkit.hpp"

#include "specfsm/ensemble.hpp"
#include "specfsm/error.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <tuple>

namespace specfsm {

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw Error(ErrorKind::Schema, "ground truth must be an object");
        GroundTruth gt;
        gt.protocol = j.value("protocol", "");
        gt.spec_version = j.value("spec_version", "");
        std::set<std::string> names;
        for (const auto& s : j.at("states")) {
            StateName name(s.at("name").get<std::string>());
            names.insert(name.str());
            gt.states.emplace_back(name, StateFlags{s.value("initial", false), s.value("final", false)});
        }
        for (const auto& t : j.at("transitions")) {
            TruthTransition tt;
            tt.from = StateName(t.at("from").get<std::string>()).str();
            tt.to = StateName(t.at("to").get<std::string>()).str();
            tt.condition = t.value("condition", "");
            tt.action = t.value("action", "");
            if (t.contains("layer") && !t["layer"].is_null()) tt.layer = t["layer"].get<std::string>();
            if (!names.contains(tt.from) || !names.contains(tt.to)) {
                throw Error(ErrorKind::Schema, "transition endpoint " + tt.from + " -> " + tt.to + " not in states");
            }
            gt.transitions.push_back(std::move(tt));
        }
        return gt;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed ground truth: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Schema) throw;
        throw Error(ErrorKind::Schema, e.what());
    }
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, path.string() + " is not JSON: " + e.what());
    }
    return ground_truth_from_json(j);
}

GroundTruth ground_truth_from_fsm(const Fsm& fsm) {
    GroundTruth gt;
    gt.protocol = fsm.protocol();
    gt.spec_version = fsm.spec_version();
    for (const auto& [name, flags] : fsm.states()) gt.states.emplace_back(name, flags);
    for (const auto& t : sorted_transitions(fsm)) {
        gt.transitions.push_back({t.from.str(), t.to.str(), t.condition, t.action, std::nullopt});
    }
    return gt;
}

namespace {

TupleView view_of_truth(const TruthTransition& t) { return {t.from, t.to, t.condition, t.action}; }

}  // namespace

MatchPartition match_transitions(const Fsm& pred, const GroundTruth& truth, double theta) {
    const auto predictions = sorted_transitions(pred);
    struct Candidate {
        double score;
        std::size_t truth;
        std::size_t prediction;
    };
    std::vector<Candidate> pairs;
    for (std::size_t p = 0; p < predictions.size(); ++p) {
        for (std::size_t t = 0; t < truth.transitions.size(); ++t) {
            auto pv = view_of(predictions[p]);
            auto tv = view_of_truth(truth.transitions[t]);
            if (transitions_aligned(pv, tv, theta)) pairs.push_back({pair_score(pv, tv), t, p});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.truth, a.prediction) < std::tie(b.truth, b.prediction);
    });

    constexpr std::size_t kFree = static_cast<std::size_t>(-1);
    std::vector<std::size_t> pred_match(predictions.size(), kFree);
    std::vector<std::size_t> truth_match(truth.transitions.size(), kFree);
    for (const auto& c : pairs) {
        if (pred_match[c.prediction] != kFree || truth_match[c.truth] != kFree) continue;
        pred_match[c.prediction] = c.truth;
        truth_match[c.truth] = c.prediction;
    }

    // Augmenting paths from each free truth; every vertex matched by the greedy
    // pass stays matched, so the result is a maximum matching.
    std::vector<std::vector<std::size_t>> adjacency(truth.transitions.size());
    for (const auto& c : pairs) {
        adjacency[c.truth].push_back(c.prediction);
    }
    std::vector<char> visited;
    std::function<bool(std::size_t)> augment = [&](std::size_t t) {
        for (std::size_t p : adjacency[t]) {
            if (visited[p]) continue;
            visited[p] = 1;
            if (pred_match[p] == kFree || augment(pred_match[p])) {
                pred_match[p] = t;
                truth_match[t] = p;
                return true;
            }
        }
        return false;
    };
    for (std::size_t t = 0; t < truth.transitions.size(); ++t) {
        if (truth_match[t] != kFree || adjacency[t].empty()) continue;
        visited.assign(predictions.size(), 0);
        augment(t);
    }

    MatchPartition out;
    for (const auto& c : pairs) {
        if (pred_match[c.prediction] == c.truth) out.matched.push_back({c.prediction, c.truth, c.score});
    }
    for (std::size_t p = 0; p < predictions.size(); ++p) {
        if (pred_match[p] == kFree) out.unmatched_predictions.push_back(p);
    }
    for (std::size_t t = 0; t < truth.transitions.size(); ++t) {
        if (truth_match[t] == kFree) out.unmatched_truths.push_back(t);
    }
    return out;
}

double f1_score(double precision, double recall) noexcept {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision_defined = tp + fp > 0;
    m.recall_defined = tp + fn > 0;
    m.precision = m.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = m.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

EvalReport score(const MatchPartition& partition, const Fsm& pred, const GroundTruth& truth, double theta) {
    EvalReport r;
    static_cast<Metrics&>(r) = metrics_from_counts(partition.matched.size(), partition.unmatched_predictions.size(),
                                                   partition.unmatched_truths.size());
    for (const auto& m : partition.matched) r.matched_pairs.emplace_back(m.prediction, m.truth);
    r.unmatched_predictions = partition.unmatched_predictions;
    r.unmatched_truths = partition.unmatched_truths;

    auto layer_of = [&](std::size_t t) { return truth.transitions[t].layer.value_or(kUnlayered); };
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
    };
    std::map<std::string, Counts> counts;
    bool any_layer = false;
    for (const auto& t : truth.transitions) any_layer = any_layer || t.layer.has_value();

    for (const auto& m : partition.matched) ++counts[layer_of(m.truth)].tp;
    for (std::size_t t : partition.unmatched_truths) ++counts[layer_of(t)].fn;

    const auto predictions = sorted_transitions(pred);
    for (std::size_t p : partition.unmatched_predictions) {
        std::string layer = kUnlayered;
        double best = -1.0;
        for (std::size_t t = 0; t < truth.transitions.size(); ++t) {
            auto pv = view_of(predictions[p]);
            auto tv = view_of_truth(truth.transitions[t]);
            if (!transitions_aligned(pv, tv, theta)) continue;
            double s = pair_score(pv, tv);
            if (s > best) {
                best = s;
                layer = layer_of(t);
            }
        }
        ++counts[layer].fp;
    }
    if (any_layer) {
        for (const auto& [layer, c] : counts) r.per_layer[layer] = metrics_from_counts(c.tp, c.fp, c.fn);
    }
    return r;
}

EvalReport evaluate(const Fsm& pred, const GroundTruth& truth, double theta) {
    return score(match_transitions(pred, truth, theta), pred, truth, theta);
}

EvalReport state_score(const std::set<std::string>& predicted, const std::set<std::string>& truth) {
    std::size_t tp = 0;
    for (const auto& s : predicted) tp += truth.contains(s) ? 1 : 0;
    EvalReport r;
    static_cast<Metrics&>(r) = metrics_from_counts(tp, predicted.size() - tp, truth.size() - tp);
    return r;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
    return {{"tp", m.tp},
            {"fp", m.fp},
            {"fn", m.fn},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"precision_defined", m.precision_defined},
            {"recall_defined", m.recall_defined}};
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
    auto j = metrics_json(report);
    auto layers = nlohmann::json::object();
    for (const auto& [layer, m] : report.per_layer) layers[layer] = metrics_json(m);
    j["per_layer"] = std::move(layers);
    j["matched_pairs"] = report.matched_pairs;
    j["unmatched_predictions"] = report.unmatched_predictions;
    j["unmatched_truths"] = report.unmatched_truths;
    return j;
}

std::string render_report_table(const EvalReport& report, const std::string& label) {
    std::vector<std::pair<std::string, const Metrics*>> rows{{label + "-all", &report}};
    for (const auto& [layer, m] : report.per_layer) rows.emplace_back(label + "-" + layer, &m);
    std::size_t width = 8;
    for (const auto& [name, m] : rows) width = std::max(width, name.size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "Protocol" << std::right << std::setw(16)
        << "Precision (%)" << std::setw(14) << "Recall (%)" << std::setw(16) << "F1-score (%)" << std::setw(6) << "TP"
        << std::setw(6) << "FP" << std::setw(6) << "FN" << "\n";
    out << std::fixed << std::setprecision(2);
    for (const auto& [name, m] : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(16)
            << m->precision * 100.0 << std::setw(14) << m->recall * 100.0 << std::setw(16) << m->f1 * 100.0
            << std::setw(6) << m->tp << std::setw(6) << m->fp << std::setw(6) << m->fn << "\n";
    }
    return out.str();
}

}  // namespace specfsm
