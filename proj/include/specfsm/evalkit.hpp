#pragma once

#include "specfsm/fsm.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace specfsm {

struct TruthTransition {
    std::string from;
    std::string to;
    std::string condition;
    std::string action;
    std::optional<std::string> layer;
};

struct GroundTruth {
    std::string protocol;
    std::string spec_version;
    std::vector<std::pair<StateName, StateFlags>> states;
    std::vector<TruthTransition> transitions;
};

/// Same schema as the FSM export plus an optional "layer" per transition.
/// Throws Error(Schema) on malformed input or an endpoint missing from states.
GroundTruth ground_truth_from_json(const nlohmann::json& j);
GroundTruth load_ground_truth(const std::filesystem::path& path);
GroundTruth ground_truth_from_fsm(const Fsm& fsm);

struct MatchedPair {
    std::size_t prediction;
    std::size_t truth;
    double score;
};

/// Prediction indices refer to sorted_transitions(pred), i.e. export order.
struct MatchPartition {
    std::vector<MatchedPair> matched;
    std::vector<std::size_t> unmatched_predictions;
    std::vector<std::size_t> unmatched_truths;
};

/// One-to-one matching over aligned pairs. Pairs are accepted greedily by
/// descending summed overlap, ties by (truth index, prediction index); free
/// truths are then matched through augmenting paths so tp is maximal.
MatchPartition match_transitions(const Fsm& pred, const GroundTruth& truth, double theta);

struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// False when the denominator was zero and the value is reported as 0.
    bool precision_defined = true;
    bool recall_defined = true;
};

double f1_score(double precision, double recall) noexcept;
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct EvalReport : Metrics {
    std::map<std::string, Metrics> per_layer;
    std::vector<std::pair<std::size_t, std::size_t>> matched_pairs;
    std::vector<std::size_t> unmatched_predictions;
    std::vector<std::size_t> unmatched_truths;
};

inline constexpr const char* kUnlayered = "unlayered";

/// Overall and per-layer metrics. A false positive counts toward the layer of
/// its best-aligned truth transition, else "unlayered".
EvalReport score(const MatchPartition& partition, const Fsm& pred, const GroundTruth& truth, double theta);

EvalReport evaluate(const Fsm& pred, const GroundTruth& truth, double theta);

/// Exact name-set comparison.
EvalReport state_score(const std::set<std::string>& predicted, const std::set<std::string>& truth);

nlohmann::json report_to_json(const EvalReport& report);
/// Plain-text table: label, Precision (%), Recall (%), F1-score (%).
std::string render_report_table(const EvalReport& report, const std::string& label);

}  // namespace specfsm
