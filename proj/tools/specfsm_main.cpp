#include "specfsm/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

namespace {

struct Args {
    std::string config;
    double theta = 0.0;
    int votes = 0;
    std::size_t max_words = 0;
    bool dump = false;
    std::string replay;
    std::string out;
    std::string truth;
    std::string fsm;
    std::string exchanges;
    std::vector<std::string> candidates;
    bool verbose = false;
};

bool given(const CLI::App& app, const std::string& name) {
    const auto* opt = app.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

specfsm::RunConfig load(const Args& a, const CLI::App& app) {
    auto config = specfsm::load_config(a.config);
    specfsm::Overrides o;
    if (given(app, "--theta")) o.theta = a.theta;
    if (given(app, "--votes")) o.votes = a.votes;
    if (given(app, "--max-words")) o.max_words = a.max_words;
    o.dump = a.dump;
    if (!a.replay.empty()) o.replay_dir = a.replay;
    if (!a.out.empty()) o.output_dir = a.out;
    if (!a.truth.empty()) o.truth = a.truth;
    specfsm::apply_overrides(config, o);
    return config;
}

void add_common(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "Output directory (overrides config)");
    sub->add_option("--max-words", a.max_words, "Window size cap in words");
}

void add_voting(CLI::App* sub, Args& a) {
    sub->add_option("--theta", a.theta, "Span overlap threshold")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--votes", a.votes, "Providers required to accept a transition")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extract protocol state machines from specification text"};
    app.require_subcommand(1);
    Args a;
    app.add_flag("-v,--verbose", a.verbose, "Debug logging");

    auto* segment = app.add_subcommand("segment", "Clean and split the document into windows");
    add_common(segment, a);

    auto* extract = app.add_subcommand("extract", "Query every provider for states and transitions");
    add_common(extract, a);
    extract->add_option("--replay", a.replay, "Serve responses from a fixture directory")->check(CLI::ExistingDirectory);

    auto* ensemble = app.add_subcommand("ensemble", "Align and vote candidate transitions");
    add_common(ensemble, a);
    add_voting(ensemble, a);
    ensemble->add_option("candidates", a.candidates, "Candidate files (default: <out>/candidates/*)");

    auto* eval = app.add_subcommand("eval", "Score an FSM against ground truth");
    add_common(eval, a);
    eval->add_option("--theta", a.theta, "Span overlap threshold")->check(CLI::Range(0.0, 1.0));
    eval->add_option("--fsm", a.fsm, "Predicted FSM (default: <out>/fsm.json)");
    eval->add_option("--truth", a.truth, "Ground truth FSM (default: config ground_truth)");

    auto* cost = app.add_subcommand("cost", "Token and latency totals per provider");
    cost->add_option("exchanges", a.exchanges, "Exchange log (JSON Lines)")->required()->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "segment, extract, ensemble and eval in one go");
    add_common(run, a);
    add_voting(run, a);
    run->add_option("--replay", a.replay, "Serve responses from a fixture directory")->check(CLI::ExistingDirectory);
    run->add_option("--truth", a.truth, "Ground truth FSM");
    run->add_flag("--dump", a.dump, "Also write windows and per-provider candidates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : specfsm::kExitUsage;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("specfsm"));
    spdlog::set_level(a.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*cost) {
            specfsm::cmd_cost(a.exchanges, std::cout);
            return specfsm::kExitOk;
        }
        if (*segment) {
            specfsm::cmd_segment(load(a, *segment), std::cout);
            return specfsm::kExitOk;
        }
        if (*extract) return specfsm::cmd_extract(load(a, *extract), std::cout);
        if (*ensemble) {
            std::vector<std::filesystem::path> files(a.candidates.begin(), a.candidates.end());
            specfsm::cmd_ensemble(load(a, *ensemble), std::cout, files);
            return specfsm::kExitOk;
        }
        if (*eval) {
            auto config = load(a, *eval);
            if (!config.ground_truth) {
                std::cerr << "eval: no ground truth (use --truth or set ground_truth in the config)\n";
                return specfsm::kExitUsage;
            }
            auto fsm = a.fsm.empty() ? config.output_dir / specfsm::artifact::kFsmJson : std::filesystem::path(a.fsm);
            specfsm::cmd_eval(config, std::cout, fsm, *config.ground_truth);
            return specfsm::kExitOk;
        }
        if (*run) return specfsm::cmd_run(load(a, *run), std::cout);
    } catch (const specfsm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return specfsm::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return specfsm::kExitUsage;
    }
    return specfsm::kExitUsage;
}
