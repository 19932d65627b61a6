// Regenerates the replay fixtures of the toy protocol: five scripted
// providers with distinct habits answer every prompt the pipeline issues, and
// each answer is stored under its prompt hash.

#include "specfsm/commands.hpp"
#include "specfsm/text.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <regex>

namespace {

using namespace specfsm;
using nlohmann::json;

std::string segment_of(const std::string& user_text) {
    const std::string open = "SPECIFICATION SEGMENT:\n<<<\n";
    auto b = user_text.find(open);
    if (b == std::string::npos) return {};
    b += open.size();
    auto e = user_text.rfind("\n>>>");
    return user_text.substr(b, e == std::string::npos || e < b ? std::string::npos : e - b);
}

std::string line_with(const std::string& seg, const std::string& needle) {
    for (auto line : text::split_lines(seg)) {
        if (line.find(needle) != std::string_view::npos) return std::string(text::trim(line));
    }
    return {};
}

json state_answer(const std::string& provider, const std::string& seg) {
    static const std::regex name_re(R"(TMM-[A-Z]+(?:-[A-Z]+)*)");
    json out = json::array();
    std::set<std::string> seen;
    for (auto it = std::sregex_iterator(seg.begin(), seg.end(), name_re); it != std::sregex_iterator(); ++it) {
        std::string name = it->str();
        if (!seen.insert(name).second) continue;
        bool initial = name == "TMM-NULL" && seg.find("This is the initial state") != std::string::npos;
        std::string shown = provider == "bravo" ? text::to_lower_ascii(name) : name;
        out.push_back({{"name", shown}, {"initial", initial}, {"final", false}, {"evidence", line_with(seg, name)}});
    }
    if (seg.find("3.2.1 TMM-NULL") != std::string::npos) {
        if (provider == "charlie") out.push_back({{"name", "Unknown"}, {"initial", false}, {"final", false}, {"evidence", ""}});
        if (provider == "delta") {
            out.push_back({{"name", "TMM-SUSPENDED"}, {"initial", false}, {"final", false}, {"evidence", ""}});
        }
    }
    return out;
}

struct Planted {
    std::string from, to, condition, action;
};

const std::vector<Planted>& planted() {
    static const std::vector<Planted> t{
        {"TMM-NULL", "TMM-DEREGISTERED", "When the terminal is switched on", "the TMM layer is activated"},
        {"TMM-DEREGISTERED", "TMM-REGISTERED-INITIATED", "If no TMM context has been established",
         "the terminal shall send an ATTACH REQUEST message to the controller"},
        {"TMM-REGISTERED-INITIATED", "TMM-REGISTERED", "Upon receipt of an ATTACH ACCEPT message",
         "the terminal shall reset the attach attempt counter"},
        {"TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED", "If the ATTACH REJECT message is received",
         "the terminal shall delete the stored temporary identity"},
        {"TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED", "If timer T3410 expires",
         "the terminal shall abort the attach procedure"},
        {"TMM-REGISTERED", "TMM-DEREGISTERED-INITIATED", "When the user requests detach",
         "the terminal shall send a DETACH REQUEST message to the controller"},
        {"TMM-DEREGISTERED-INITIATED", "TMM-DEREGISTERED", "Upon receipt of a DETACH ACCEPT message",
         "the terminal shall release the TMM context"},
        {"TMM-REGISTERED", "TMM-DEREGISTERED",
         "When the terminal receives a DETACH REQUEST message from the controller",
         "the terminal shall send a DETACH ACCEPT message"},
    };
    return t;
}

json transition(const std::string& from, const std::string& to, const std::string& cond, const std::string& action) {
    return {{"from", from}, {"to", to}, {"condition", cond}, {"action", action}, {"inferred", false}};
}

std::string transition_answer(const std::string& provider, const std::string& seg) {
    json out = json::array();
    for (const auto& p : planted()) {
        if (seg.find(p.condition) == std::string::npos) continue;
        if (provider == "charlie" && p.condition == "If timer T3410 expires") continue;
        std::string cond = p.condition;
        std::string action = p.action;
        if (provider == "bravo") {
            // drop the leading conjunction, keep the state change in the action
            cond = cond.substr(cond.find(' ') + 1);
            auto longer = action + " and enter state " + p.to;
            if (seg.find(longer) != std::string::npos) action = longer;
        }
        out.push_back(transition(p.from, p.to, cond, action));
    }
    const bool detach_window = seg.find("4.3 Detach procedure") != std::string::npos;
    if (detach_window && (provider == "charlie" || provider == "echo")) {
        out.push_back(transition("TMM-REGISTERED", "TMM-DEREGISTERED", "When the user requests detach",
                                 "the terminal shall send a DETACH REQUEST message to the controller"));
    }
    if (provider == "echo" && seg.find("4.2 Attach procedure") != std::string::npos) {
        out.push_back(transition("TMM-DEREGISTERED", "TMM-REGISTERED", "Upon receipt of an ATTACH ACCEPT message",
                                 "the terminal shall reset the attach attempt counter"));
    }
    std::string body = out.dump();
    if (provider == "delta" && detach_window) return body.substr(0, body.size() / 2);
    if (provider == "echo") return "The segment describes the following transitions.\n```json\n" + out.dump(2) + "\n```\n";
    return body;
}

class AuthoringProvider final : public ChatProvider {
public:
    AuthoringProvider(std::string name, std::filesystem::path dir, std::int64_t base_latency)
        : name_(std::move(name)), dir_(std::move(dir)), base_latency_(base_latency) {}

    const std::string& name() const override { return name_; }

    LlmExchange complete(const PromptBundle& bundle, ExchangeLog& log) override {
        const auto seg = segment_of(bundle.user_text);
        std::string response;
        if (bundle.phase == Phase::StateExtraction) {
            if (name_ == "charlie" && seg.find("1 Scope") != std::string::npos) {
                response = "This segment only introduces the document and defines no states.";
            } else {
                auto states = state_answer(name_, seg);
                response = name_ == "echo" ? "States found:\n```json\n" + states.dump(2) + "\n```\n" : states.dump();
            }
        } else {
            response = transition_answer(name_, seg);
        }
        ReplayRecord r;
        r.response_text = response;
        r.input_tokens = static_cast<std::int64_t>(text::word_count(bundle.hashed_text()));
        r.output_tokens = static_cast<std::int64_t>(text::word_count(response));
        r.latency_ms = base_latency_ + 15 * r.output_tokens;
        write_replay_record(dir_, prompt_sha256(bundle), r);

        LlmExchange ex;
        ex.provider = name_;
        ex.prompt_sha256 = prompt_sha256(bundle);
        ex.response_text = response;
        ex.input_tokens = r.input_tokens;
        ex.output_tokens = r.output_tokens;
        ex.latency_ms = r.latency_ms;
        ex.attempt = 1;
        ex.phase = std::string(to_string(bundle.phase));
        ex.window_id = bundle.window_id;
        log.append(ex);
        return ex;
    }

private:
    std::string name_;
    std::filesystem::path dir_;
    std::int64_t base_latency_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Author replay fixtures for the toy protocol"};
    std::string config_path;
    std::string replay_dir;
    std::string scratch = "author_scratch";
    app.add_option("--config", config_path, "Toy run config")->required()->check(CLI::ExistingFile);
    app.add_option("--replay", replay_dir, "Fixture directory to (re)write")->required();
    app.add_option("--scratch", scratch, "Where candidate files and the log go");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);

    try {
        auto config = load_config(config_path);
        config.replay_dir.reset();
        config.output_dir = scratch;
        std::filesystem::remove_all(replay_dir);
        std::map<std::string, std::int64_t> latency{
            {"alpha", 900}, {"bravo", 1400}, {"charlie", 700}, {"delta", 2100}, {"echo", 1100}};
        auto factory = [&](const ProviderConfig& p) -> std::shared_ptr<ChatProvider> {
            return std::make_shared<AuthoringProvider>(p.name, std::filesystem::path(replay_dir) / p.name,
                                                       latency.count(p.name) ? latency[p.name] : 1000);
        };
        return cmd_extract(config, std::cout, true, factory);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}
