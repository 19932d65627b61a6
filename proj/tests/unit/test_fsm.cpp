#include "specfsm/error.hpp"
#include "specfsm/fsm.hpp"

#include <doctest.h>

using namespace specfsm;

namespace {

Transition tr(const char* from, const char* to, const char* c, const char* a, const char* provider = "p", int w = 0) {
    Transition t{StateName(from), StateName(to), c, a, {}};
    t.provenance.providers.insert(provider);
    t.provenance.window_ids.insert(w);
    return t;
}

std::set<StateName> catalog(std::initializer_list<const char*> names) {
    std::set<StateName> out;
    for (auto n : names) out.insert(StateName(n));
    return out;
}

}  // namespace

TEST_CASE("state names are canonical") {
    CHECK(StateName(" 5gmm-registered.plmn-search ").str() == "5GMM-REGISTERED.PLMN-SEARCH");
    CHECK(StateName("any   state").str() == "ANY STATE");
    CHECK(StateName("A.IDLE").last_component() == "IDLE");
    CHECK_THROWS_AS(StateName("   "), Error);
}

TEST_CASE("denylist is case-insensitive") {
    const auto& d = StateDenylist::defaults();
    CHECK(d.contains("Unknown"));
    CHECK(d.contains("undefined"));
    CHECK(d.contains("Any  State"));
    CHECK(d.contains("n/a"));
    CHECK(d.contains(""));
    CHECK_FALSE(d.contains("5GMM-NULL"));
    StateDenylist custom({"limbo"});
    CHECK(custom.contains("LIMBO"));
    CHECK_FALSE(custom.contains("unknown"));
}

TEST_CASE("qualify_state") {
    auto cat = catalog({"5GMM-REGISTERED", "5GMM-REGISTERED.PLMN-SEARCH", "A.IDLE", "B.IDLE"});
    SUBCASE("abbreviated substate expands") {
        auto q = qualify_state("PLMN-SEARCH", cat);
        CHECK(q.name.str() == "5GMM-REGISTERED.PLMN-SEARCH");
        CHECK(q.in_catalog);
    }
    SUBCASE("exact match") {
        auto q = qualify_state("5GMM-REGISTERED", cat);
        CHECK(q.name.str() == "5GMM-REGISTERED");
        CHECK(q.in_catalog);
    }
    SUBCASE("ambiguous suffix") { CHECK_THROWS_AS(qualify_state("IDLE", cat), Error); }
    SUBCASE("unknown name is flagged") {
        auto q = qualify_state("5gmm-null", cat);
        CHECK(q.name.str() == "5GMM-NULL");
        CHECK_FALSE(q.in_catalog);
    }
    SUBCASE("ambiguity kind") {
        try {
            qualify_state("idle", cat);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::AmbiguousSubstate);
        }
    }
}

TEST_CASE("add_transition dedups and merges provenance") {
    Fsm f("NAS", "R17");
    f.add_transition(tr("S1", "S2", "c", "a", "a"));
    f.add_transition(tr("S1", "S2", "c", "a", "b", 4));
    REQUIRE(f.transitions().size() == 1);
    CHECK(f.transitions()[0].provenance.votes() == 2);
    CHECK(f.transitions()[0].provenance.window_ids == std::set<int>{0, 4});
}

TEST_CASE("add_transition rejects pseudo-states") {
    Fsm f;
    try {
        f.add_transition(tr("S1", "Unknown", "c", "a"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::PseudoState);
    }
    CHECK(f.transitions().empty());
    CHECK(f.states().empty());
}

TEST_CASE("closure: endpoints are auto-inserted without flags") {
    Fsm f;
    f.add_transition(tr("S1", "S2", "c", "a"));
    CHECK(f.states().size() == 2);
    CHECK(f.transitions().size() == 1);
    CHECK(f.states().at(StateName("S1")) == StateFlags{});
    f.add_state(StateName("S1"), true, false);
    f.add_state(StateName("S1"), false, true);
    CHECK(f.states().at(StateName("S1")) == StateFlags{true, true});
}

TEST_CASE("json export is sorted, stable and round-trips") {
    Fsm f("NAS", "R17");
    f.add_state(StateName("5GMM-NULL"), true, false);
    f.add_transition(tr("B", "C", "z", "y", "q", 2));
    f.add_transition(tr("A", "B", "", "act", "p", 1));
    const auto bytes = export_json(f);
    CHECK(bytes == export_json(f));
    auto j = nlohmann::json::parse(bytes);
    CHECK(j["states"][0]["name"] == "5GMM-NULL");
    CHECK(j["transitions"][0]["from"] == "A");
    CHECK(j["transitions"][0]["votes"] == 1);
    CHECK(j["transitions"][0]["window_ids"] == nlohmann::json::array({1}));
    CHECK(import_json(bytes) == f);
    CHECK(export_json(import_json(bytes)) == bytes);
}

TEST_CASE("empty FSM export") {
    Fsm f("NAS", "R17");
    auto j = nlohmann::json::parse(export_json(f));
    CHECK(j["protocol"] == "NAS");
    CHECK(j["states"].empty());
    CHECK(j["transitions"].empty());
    CHECK(export_dot(f) == "digraph { }\n");
}

TEST_CASE("import rejects malformed documents") {
    CHECK_THROWS_AS(import_json("not json"), Error);
    CHECK_THROWS_AS(import_json(R"({"protocol":"x","states":[]})"), Error);
    CHECK_THROWS_AS(import_json(R"({"protocol":"x","states":[],"transitions":[{"from":"A"}]})"), Error);
}

TEST_CASE("dot export") {
    Fsm f;
    f.add_state(StateName("S1"), true, false);
    f.add_state(StateName("S2"), false, true);
    f.add_transition(tr("S1", "S2", std::string(50, 'c').c_str(), "an action that is long enough"));
    const auto dot = export_dot(f);
    CHECK(dot.rfind("digraph {", 0) == 0);
    CHECK(dot.find("\"S1\" [shape=circle]") != std::string::npos);
    CHECK(dot.find("\"S2\" [shape=doublecircle]") != std::string::npos);
    CHECK(dot.find("[shape=point") != std::string::npos);
    const auto label_at = dot.find("label=\"cc");
    REQUIRE(label_at != std::string::npos);
    const auto label = dot.substr(label_at + 7, dot.find('"', label_at + 7) - label_at - 7);
    CHECK(label.size() == kDotLabelLimit);
    CHECK(label.substr(57) == "...");
}

TEST_CASE("fsm equality ignores transition order") {
    Fsm a;
    Fsm b;
    a.add_transition(tr("A", "B", "c", "x"));
    a.add_transition(tr("B", "C", "c", "x"));
    b.add_transition(tr("B", "C", "c", "x"));
    b.add_transition(tr("A", "B", "c", "x"));
    CHECK(a == b);
}
