#include "specfsm/evalkit.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace specfsm;

namespace {

Transition tr(std::string from, std::string to, std::string cond, std::string action) {
    return {StateName(from), StateName(to), std::move(cond), std::move(action), {}};
}

GroundTruth truth_of(std::vector<TruthTransition> ts) {
    GroundTruth g;
    g.protocol = "TOY";
    std::set<std::string> names;
    for (const auto& t : ts) {
        names.insert(t.from);
        names.insert(t.to);
    }
    for (const auto& n : names) g.states.emplace_back(StateName(n), StateFlags{});
    g.transitions = std::move(ts);
    return g;
}

Fsm fsm_of(std::vector<Transition> ts) {
    Fsm f("TOY", "1");
    for (auto& t : ts) f.add_transition(std::move(t));
    return f;
}

// n distinct transitions sharing no condition or action tokens.
std::vector<TruthTransition> distinct(int n, const std::string& layer = "") {
    std::vector<TruthTransition> out;
    for (int i = 0; i < n; ++i) {
        TruthTransition t{"S" + std::to_string(i), "S" + std::to_string(i + 1), "cond" + std::to_string(i),
                          "act" + std::to_string(i), std::nullopt};
        if (!layer.empty()) t.layer = layer;
        out.push_back(t);
    }
    return out;
}

Transition as_pred(const TruthTransition& t) { return tr(t.from, t.to, t.condition, t.action); }

}  // namespace

TEST_CASE("f1 of the comparison table rows") {
    const struct {
        double p, r, f1;
    } rows[] = {{80.39, 87.23, 83.67}, {68.70, 84.04, 75.60}, {70.00, 89.36, 78.50},
                {79.09, 92.55, 85.29}, {61.71, 77.66, 68.77}, {91.86, 90.43, 91.14}};
    for (const auto& row : rows) CHECK(std::abs(f1_score(row.p, row.r) - row.f1) <= 0.01);
    CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("counts to metrics") {
    auto m = metrics_from_counts(9, 1, 3);
    CHECK(m.precision == doctest::Approx(0.9));
    CHECK(m.recall == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(0.8181818));

    auto none = metrics_from_counts(0, 0, 4);
    CHECK_FALSE(none.precision_defined);
    CHECK(none.precision == 0.0);
    CHECK(none.recall_defined);
    CHECK(none.f1 == 0.0);
}

TEST_CASE("identity scores one") {
    auto truth = truth_of(distinct(6));
    std::vector<Transition> preds;
    for (const auto& t : truth.transitions) preds.push_back(as_pred(t));
    auto r = evaluate(fsm_of(preds), truth, 0.75);
    CHECK(r.tp == 6);
    CHECK(r.f1 == 1.0);
    CHECK(r.per_layer.empty());
}

TEST_CASE("empty prediction") {
    auto r = evaluate(Fsm("TOY", "1"), truth_of(distinct(3)), 0.75);
    CHECK(r.tp == 0);
    CHECK(r.fn == 3);
    CHECK_FALSE(r.precision_defined);
    CHECK(r.f1 == 0.0);
}

TEST_CASE("matching is one-to-one") {
    auto truth = truth_of({{"A", "B", "when the timer expires", "abort", std::nullopt}});
    auto pred = fsm_of({tr("A", "B", "when the timer expires", "abort"),
                        tr("A", "B", "when the timer expires again", "abort")});
    auto r = evaluate(pred, truth, 0.75);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 0);
    REQUIRE(r.matched_pairs.size() == 1);
    // the exact copy wins on summed overlap
    CHECK(sorted_transitions(pred)[r.matched_pairs[0].first].condition == "when the timer expires");
}

TEST_CASE("matching recovers from a greedy choice") {
    // p0 scores best with t0 but p1 can only match t0; augmentation moves p0 to t1.
    auto truth = truth_of({{"A", "B", "x y z w", "go", std::nullopt}, {"A", "B", "x y z v", "go", std::nullopt}});
    auto pred = fsm_of({tr("A", "B", "x y z w", "go"), tr("A", "B", "x y w q", "go")});
    auto part = match_transitions(pred, truth, 0.75);
    CHECK(part.matched.size() == 2);
}

TEST_CASE("planted counts") {
    auto truth_ts = distinct(12);
    std::vector<Transition> preds;
    for (int i = 0; i < 9; ++i) preds.push_back(as_pred(truth_ts[i]));
    preds.push_back(tr("Z", "Y", "noise", "noise"));
    auto r = evaluate(fsm_of(preds), truth_of(truth_ts), 0.75);
    CHECK(r.tp == 9);
    CHECK(r.fp == 1);
    CHECK(r.fn == 3);
    CHECK(r.precision == doctest::Approx(0.9));
    CHECK(r.recall == doctest::Approx(0.75));
    CHECK(r.f1 == doctest::Approx(9.0 / 11.0));
}

TEST_CASE("state scores") {
    std::set<std::string> truth;
    for (int i = 0; i < 18; ++i) truth.insert("S" + std::to_string(i));
    CHECK(state_score(truth, truth).f1 == 1.0);
    auto missing = truth;
    missing.erase("S0");
    CHECK(state_score(missing, truth).recall == doctest::Approx(17.0 / 18.0));
    CHECK(state_score(missing, truth).precision == 1.0);
    auto extra = truth;
    extra.insert("S99");
    CHECK(state_score(extra, truth).precision == doctest::Approx(18.0 / 19.0));
    CHECK(state_score(extra, truth).recall == 1.0);
}

TEST_CASE("per-layer scoring") {
    auto ts = distinct(4, "attach");
    ts[2].layer = "detach";
    ts[3].layer = "detach";
    auto truth = truth_of(ts);
    // one exact hit per layer, a second copy of t3, one unrelated noise
    auto pred = fsm_of({as_pred(ts[0]), as_pred(ts[3]), tr(ts[3].from, ts[3].to, ts[3].condition, "act3 again"),
                        tr("Q", "R", "noise", "noise")});
    auto r = evaluate(pred, truth, 0.75);
    CHECK(r.tp == 2);
    CHECK(r.fp == 2);
    CHECK(r.fn == 2);
    REQUIRE(r.per_layer.size() == 3);
    CHECK(r.per_layer.at("attach").tp == 1);
    CHECK(r.per_layer.at("attach").fn == 1);
    CHECK(r.per_layer.at("detach").tp == 1);
    CHECK(r.per_layer.at("detach").fp == 1);
    CHECK(r.per_layer.at(kUnlayered).fp == 1);

    auto table = render_report_table(r, "TOY");
    CHECK(table.find("TOY-all") != std::string::npos);
    CHECK(table.find("TOY-detach") != std::string::npos);
    CHECK(table.find("F1-score (%)") != std::string::npos);
    CHECK(report_to_json(r)["tp"] == 2);
}

TEST_CASE("ground truth schema") {
    auto good = nlohmann::json::parse(R"({"protocol":"P","spec_version":"1",
        "states":[{"name":"A","initial":true,"final":false},{"name":"B","initial":false,"final":true}],
        "transitions":[{"from":"A","to":"B","condition":"c","action":"a","layer":"l1"}]})");
    auto g = ground_truth_from_json(good);
    CHECK(g.states.size() == 2);
    CHECK(g.transitions.at(0).layer == "l1");

    auto expect_schema = [](const nlohmann::json& j) {
        try {
            ground_truth_from_json(j);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Schema);
        }
    };
    auto bad = good;
    bad["transitions"][0]["to"] = "C";
    expect_schema(bad);
    bad = good;
    bad.erase("states");
    expect_schema(bad);
    bad = good;
    bad["transitions"][0]["condition"] = 3;
    expect_schema(bad);
    expect_schema(nlohmann::json::array());
}

TEST_CASE("ground truth from an exported fsm") {
    auto f = fsm_of({tr("A", "B", "c", "a")});
    auto g = ground_truth_from_fsm(f);
    CHECK(evaluate(f, g, 0.75).f1 == 1.0);
    CHECK(evaluate(f, load_ground_truth(support::fixtures() / "toy" / "truth.json"), 0.75).tp == 0);
}

TEST_CASE("raising theta never adds matches") {
    auto truth = load_ground_truth(support::fixtures() / "toy" / "truth.json");
    Fsm pred("TMM", "1.2.0");
    for (const auto& t : truth.transitions) {
        auto words = "xx " + t.condition.substr(t.condition.find(' ') + 1);
        pred.add_transition(tr(t.from, t.to, words, t.action + " and more"));
    }
    std::size_t prev = 1000;
    for (double theta : {0.1, 0.3, 0.5, 0.7, 0.75, 0.8, 0.9, 1.0}) {
        auto tp = evaluate(pred, truth, theta).tp;
        CHECK(tp <= prev);
        prev = tp;
    }
    CHECK(prev == 0);
}
