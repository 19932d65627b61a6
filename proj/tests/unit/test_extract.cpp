#include "specfsm/commands.hpp"
#include "specfsm/extract.hpp"
#include "specfsm/text.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace specfsm;

namespace {

Window window(std::string text, int id) {
    Window w;
    w.window_id = id;
    w.section_numbers = {"4." + std::to_string(id + 1)};
    w.text = std::move(text);
    w.word_count = text::word_count(w.text);
    w.paragraphs = {w.text};
    return w;
}

ProtocolProfile toy() { return {"TMM", ProtocolStyle::StateOriented, {"TMM-"}, {}}; }

// Replies by phase and window from two fixed tables.
ScriptedProvider scripted(std::map<int, std::string> states, std::map<int, std::string> transitions) {
    return ScriptedProvider("s", [states, transitions](const PromptBundle& b) {
        const auto& table = b.phase == Phase::StateExtraction ? states : transitions;
        auto it = table.find(b.window_id);
        return it == table.end() ? std::string("[]") : it->second;
    });
}

}  // namespace

TEST_CASE("parse a single state") {
    auto p = parse_model_output(R"([{"name":"5GMM-NULL","initial":true,"final":false,"evidence":"x"}])",
                                Phase::StateExtraction, 4, "alpha");
    REQUIRE(p.states.size() == 1);
    CHECK(p.states[0].name == "5GMM-NULL");
    CHECK(p.states[0].initial);
    CHECK(p.states[0].window_id == 4);
    CHECK(p.states[0].provider == "alpha");
    CHECK(p.failures.empty());
}

TEST_CASE("fenced empty array") {
    auto p = parse_model_output("```json\n[]\n```", Phase::TransitionExtraction);
    CHECK(p.transitions.empty());
    CHECK(p.failures.empty());
    CHECK(p.elements == 0);
}

TEST_CASE("prose around the array is tolerated") {
    auto p = parse_model_output("Here you go [see below]:\n[{\"from\":\"A\",\"to\":\"B\",\"condition\":\"c\"}]\nDone.",
                                Phase::TransitionExtraction);
    REQUIRE(p.transitions.size() == 1);
    CHECK(p.transitions[0].from_raw == "A");
    CHECK(p.transitions[0].action.empty());
    CHECK_FALSE(p.transitions[0].inferred);
}

TEST_CASE("prose only and truncated output are failures") {
    auto prose = parse_model_output("I could not find any states in this text.", Phase::StateExtraction, 2);
    CHECK(prose.states.empty());
    REQUIRE(prose.failures.size() == 1);
    CHECK(prose.failures[0].window_id == 2);

    auto cut = parse_model_output(R"([{"from":"A","to":"B","condition":"when x)", Phase::TransitionExtraction);
    CHECK(cut.transitions.empty());
    CHECK(cut.failures.size() == 1);
}

TEST_CASE("schema violations are per element") {
    auto p = parse_model_output(R"([
        {"from":"A","to":"B","condition":"c","action":"a"},
        {"from":"A","condition":"c"},
        {"from":"A","to":"B","condition":"","action":""},
        {"from":"A","to":"B","condition":"c","inferred":"yes"},
        {"from":"A","to":"B","condition":7},
        "A -> B"
    ])",
                                Phase::TransitionExtraction);
    CHECK(p.elements == 6);
    CHECK(p.transitions.size() == 1);
    CHECK(p.failures.size() == 5);

    auto s = parse_model_output(R"([{"name":1},{"initial":true},{"name":"X","final":"no"},{"name":"Y"}])",
                                Phase::StateExtraction);
    CHECK(s.states.size() == 1);
    CHECK(s.failures.size() == 3);
}

TEST_CASE("state phase drops pseudo-states and collapses duplicates") {
    std::vector<Window> ws{window("The terminal is in state TMM-NULL. It may be in any state.", 0),
                           window("Later tmm-null is left for TMM-DEREGISTERED.", 1)};
    auto p = scripted({{0, R"([{"name":"TMM-NULL","initial":true},{"name":"Unknown"},{"name":"any state"}])"},
                       {1, R"([{"name":"tmm-null"},{"name":"TMM-DEREGISTERED"},{"name":"  "}])"}},
                      {});
    ExchangeLog log;
    auto r = run_state_phase(ws, toy(), p, log);
    CHECK(r.catalog == std::set<StateName>{StateName("TMM-NULL"), StateName("TMM-DEREGISTERED")});
    CHECK(r.raw_count == 6);
    CHECK(r.dropped.size() == 3);
    CHECK(log.size() == 2);
}

TEST_CASE("state phase expands abbreviated substates") {
    std::vector<Window> ws{window("Substate 5GMM-REGISTERED.PLMN-SEARCH is entered.", 0),
                           window("In PLMN-SEARCH the UE looks for cells.", 1)};
    auto p = scripted({{0, R"([{"name":"5GMM-REGISTERED.PLMN-SEARCH"}])"}, {1, R"([{"name":"PLMN-SEARCH"}])"}}, {});
    ExchangeLog log;
    auto r = run_state_phase(ws, {"NAS", ProtocolStyle::StateOriented, {"5GMM-"}, {}}, p, log);
    CHECK(r.catalog == std::set<StateName>{StateName("5GMM-REGISTERED.PLMN-SEARCH")});
}

TEST_CASE("transition phase grounding and inference rules") {
    const std::string body =
        "When the timer expires, the terminal shall abort the procedure and enter state TMM-DEREGISTERED.";
    std::vector<Window> ws{window(body, 0)};
    std::set<StateName> catalog{StateName("TMM-REGISTERED"), StateName("TMM-DEREGISTERED")};
    auto p = scripted({}, {{0, R"([
        {"from":"TMM-REGISTERED","to":"TMM-DEREGISTERED","condition":"When the   timer expires","action":"the terminal shall abort the procedure"},
        {"from":"TMM-REGISTERED","to":"TMM-DEREGISTERED","condition":"When the timer is stopped","action":""},
        {"from":"TMM-REGISTERED","to":"TMM-DEREGISTERED","condition":"When the timer expires","action":"the terminal shall reboot"},
        {"from":"TMM-REGISTERED","to":"TMM-LIMBO","condition":"When the timer expires","action":"","inferred":true},
        {"from":"TMM-REGISTERED","to":"TMM-LIMBO","condition":"When the timer expires","action":"","inferred":false},
        {"from":"TMM-REGISTERED","to":"TMM-DEREGISTERED","condition":"When the timer expires","action":"","inferred":true}
    ])"}});
    ExchangeLog log;
    auto r = run_transition_phase(ws, toy(), catalog, p, log);
    CHECK(r.raw_count == 6);
    REQUIRE(r.transitions.size() == 3);
    CHECK(r.dropped.size() == 3);
    CHECK(r.transitions[0].from_in_catalog);
    CHECK_FALSE(r.transitions[1].to_in_catalog);
    CHECK(r.transitions[1].to == "TMM-LIMBO");
    CHECK(r.transitions[2].inferred);
}

TEST_CASE("transition phase needs a catalog") {
    auto p = scripted({}, {});
    ExchangeLog log;
    try {
        run_transition_phase({window("x", 0)}, toy(), {}, p, log);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyCatalog);
    }
    CHECK(log.size() == 0);
}

TEST_CASE("postprocess") {
    using support::cand;
    SUBCASE("empty endpoint") {
        auto r = postprocess({cand("p", "", "B", "c", "a")});
        CHECK(r.survivors.empty());
        CHECK(r.dropped.size() == 1);
    }
    SUBCASE("pseudo-state endpoint") {
        auto r = postprocess({cand("p", "UNKNOWN", "B", "c", "a")});
        CHECK(r.survivors.empty());
    }
    SUBCASE("duplicates keep the earliest window") {
        auto r = postprocess({cand("p", "A", "B", "c", "a", 7), cand("p", "A", "B", "c  ", "a", 3)});
        REQUIRE(r.survivors.size() == 1);
        CHECK(r.survivors[0].window_id == 3);
        CHECK(r.dropped.size() == 1);
    }
    SUBCASE("identity on clean input") {
        std::vector<CandidateTransition> in{cand("p", "A", "B", "c", "a", 0), cand("p", "B", "A", "d", "e", 1),
                                            cand("q", "A", "B", "c", "a", 0)};
        auto r = postprocess(in);
        CHECK(r.survivors == in);
        CHECK(r.dropped.empty());
    }
}

TEST_CASE("candidate set json round-trip") {
    auto s = support::set_of("p", {support::cand("p", "A", "B", "c", "a", 2)});
    s.parse_failures.push_back({1, "no JSON array in model output"});
    s.dropped.push_back({0, "transition", "condition not found in window", "A -> B"});
    s.raw_transition_count = 3;
    nlohmann::json j = s;
    CHECK(j.get<CandidateSet>() == s);
}

TEST_CASE("toy replay extraction") {
    auto config = load_config(support::fixtures() / "toy" / "config.json");
    config.output_dir = support::scratch_dir("extract_toy");
    std::ostringstream out;
    REQUIRE(cmd_extract(config, out) == kExitOk);

    auto read = [&](const std::string& name) {
        return nlohmann::json::parse(support::read_file(config.output_dir / artifact::kCandidatesDir / (name + ".json")))
            .get<CandidateSet>();
    };
    auto alpha = read("alpha");
    std::set<std::string> names;
    for (const auto& s : alpha.states) names.insert(s.name);
    CHECK(names.size() == 5);
    CHECK(alpha.transitions.size() == 8);
    CHECK(alpha.parse_failures.empty());

    // Every kept element was reported by the model.
    for (const auto& p : {"alpha", "bravo", "charlie", "delta", "echo"}) {
        auto s = read(p);
        CHECK(s.transitions.size() <= s.raw_transition_count);
        CHECK(s.states.size() <= s.raw_state_count);
    }
    CHECK_FALSE(read("charlie").parse_failures.empty());
    CHECK_FALSE(read("delta").parse_failures.empty());
    CHECK(ExchangeLog::read_jsonl(config.output_dir / artifact::kExchanges).size() == 60);
}
