#include "specfsm/commands.hpp"

#include "specfsm/extract.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <sstream>

namespace specfsm {

namespace fs = std::filesystem;

void apply_overrides(RunConfig& config, const Overrides& o) {
    if (o.theta) config.alignment.theta = *o.theta;
    if (o.votes) config.alignment.vote_threshold = *o.votes;
    if (o.max_words) {
        if (*o.max_words == 0) throw Error(ErrorKind::Config, "--max-words must be positive");
        config.max_words = *o.max_words;
    }
    if (o.dump) config.dump = true;
    if (o.replay_dir) {
        if (!fs::is_directory(*o.replay_dir)) {
            throw Error(ErrorKind::Config, "replay directory not found: " + o.replay_dir->string());
        }
        config.replay_dir = *o.replay_dir;
    }
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.truth) config.ground_truth = *o.truth;
    config.alignment.validate(static_cast<int>(config.providers.size()));
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::AuthFailure:
        case ErrorKind::Timeout:
        case ErrorKind::FixtureMiss:
            return kExitProvider;
        case ErrorKind::Schema:
            return kExitSchema;
        default:
            return kExitUsage;
    }
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << bytes;
}

RawDocument load_document(const fs::path& path, const std::string& doc_id, const RunConfig& config) {
    return {doc_id, read_file(path), config.profile.protocol, config.spec_version};
}

SectionIndex build_index(const Segmentation& main, const RunConfig& config) {
    auto index = SectionIndex::from_tree(main.tree);
    for (const auto& ref : config.reference_documents) {
        auto seg = segment_document(load_document(ref, ref.stem().string(), config), config.cleaning, config.max_words);
        index.add_tree(seg.tree);
    }
    return index;
}

Segmentation segment(const RunConfig& config) {
    return segment_document(load_document(config.document, config.doc_id, config), config.cleaning, config.max_words);
}

std::vector<std::shared_ptr<ChatProvider>> make_providers(const RunConfig& config, const ProviderFactory& factory) {
    auto limiter =
        std::make_shared<ConcurrencyLimiter>(config.concurrency.global_cap, config.concurrency.per_provider_cap);
    const auto make = factory ? factory : default_provider_factory(config);
    std::vector<std::shared_ptr<ChatProvider>> out;
    for (const auto& p : config.providers) out.push_back(std::make_shared<LimitedProvider>(make(p), limiter));
    return out;
}

fs::path candidates_path(const RunConfig& config, const std::string& provider) {
    return config.output_dir / artifact::kCandidatesDir / (provider + ".json");
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int extract_into(const RunConfig& config, const Segmentation& seg, std::ostream& out, bool write_candidates,
                 const ProviderFactory& factory, std::vector<CandidateSet>* sets_out) {
    std::optional<TemplateSet> loaded;
    if (config.templates_dir) loaded = TemplateSet::load(*config.templates_dir);
    const auto index = build_index(seg, config);

    ExtractionOptions options;
    options.templates = loaded ? &*loaded : &TemplateSet::builtin();
    options.index = &index;
    options.context = config.context;
    options.references = config.references;
    options.denylist = config.denylist;

    ExchangeLog log;
    auto run = run_extraction(make_providers(config, factory), seg.windows, config.profile, config.spec_version, log, options);

    fs::create_directories(config.output_dir);
    log.write_jsonl(config.output_dir / artifact::kExchanges);
    for (const auto& set : run.sets) {
        if (write_candidates) write_file(candidates_path(config, set.provider), json_text(nlohmann::json(set)));
        out << set.provider << ": " << set.states.size() << " states, " << set.transitions.size() << " transitions, "
            << set.parse_failures.size() << " parse failures, " << set.dropped.size() << " dropped\n";
    }
    for (const auto& f : run.failures) out << f.provider << ": FAILED (" << to_string(f.kind) << ") " << f.message << "\n";
    if (sets_out) *sets_out = std::move(run.sets);
    return run.failures.empty() ? kExitOk : kExitProvider;
}

Fsm ensemble_into(const RunConfig& config, const std::vector<CandidateSet>& sets, std::ostream& out) {
    auto fsm = ensemble_fsm(sets, config.alignment, config.denylist);
    fs::create_directories(config.output_dir);
    write_file(config.output_dir / artifact::kFsmJson, export_json(fsm));
    write_file(config.output_dir / artifact::kFsmDot, export_dot(fsm));
    out << "fsm: " << fsm.states().size() << " states, " << fsm.transitions().size() << " transitions\n";
    return fsm;
}

}  // namespace

ProviderFactory default_provider_factory(const RunConfig& config) {
    if (config.replay_dir) {
        return [dir = *config.replay_dir](const ProviderConfig& p) -> std::shared_ptr<ChatProvider> {
            return std::make_shared<ReplayProvider>(p.name, dir / p.name);
        };
    }
    return [transport = std::shared_ptr<HttpTransport>()](const ProviderConfig& p) mutable
           -> std::shared_ptr<ChatProvider> {
        if (!transport) transport = make_default_transport();
        return std::make_shared<HttpChatProvider>(p, transport);
    };
}

Segmentation cmd_segment(const RunConfig& config, std::ostream& out) {
    auto seg = segment(config);
    write_file(config.output_dir / artifact::kWindows, json_text(windows_to_json(seg.windows)));
    out << seg.windows.size() << " windows\n";
    return seg;
}

int cmd_extract(const RunConfig& config, std::ostream& out, bool write_candidates, const ProviderFactory& factory) {
    auto seg = segment(config);
    return extract_into(config, seg, out, write_candidates, factory, nullptr);
}

Fsm cmd_ensemble(const RunConfig& config, std::ostream& out, const std::vector<fs::path>& candidate_files) {
    std::vector<fs::path> files = candidate_files;
    if (files.empty()) {
        for (const auto& p : config.providers) {
            auto path = candidates_path(config, p.name);
            if (fs::exists(path)) {
                files.push_back(path);
            } else {
                spdlog::warn("no candidates for provider {} at {}", p.name, path.string());
            }
        }
    }
    std::vector<CandidateSet> sets;
    for (const auto& f : files) {
        try {
            sets.push_back(nlohmann::json::parse(read_file(f)).get<CandidateSet>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Schema, f.string() + ": " + e.what());
        }
    }
    return ensemble_into(config, sets, out);
}

EvalReport cmd_eval(const RunConfig& config, std::ostream& out, const fs::path& fsm_path, const fs::path& truth_path) {
    const auto pred = import_json(read_file(fsm_path), config.denylist);
    const auto truth = load_ground_truth(truth_path);
    auto report = evaluate(pred, truth, config.alignment.theta);

    std::set<std::string> pred_states;
    for (const auto& [name, flags] : pred.states()) pred_states.insert(name.str());
    std::set<std::string> truth_states;
    for (const auto& [name, flags] : truth.states) truth_states.insert(name.str());
    auto states = state_score(pred_states, truth_states);

    auto j = report_to_json(report);
    j["states"] = report_to_json(states);
    j["theta"] = config.alignment.theta;
    const auto label = truth.protocol.empty() ? config.profile.protocol : truth.protocol;
    const auto table = render_report_table(report, label);
    write_file(config.output_dir / artifact::kReportJson, json_text(j));
    write_file(config.output_dir / artifact::kReportText, table);
    out << table;
    return report;
}

std::vector<CostRow> cmd_cost(const fs::path& exchange_log, std::ostream& out) {
    auto rows = cost_report(ExchangeLog::read_jsonl(exchange_log));
    out << render_cost_table(rows);
    return rows;
}

int cmd_run(const RunConfig& config, std::ostream& out) {
    auto seg = segment(config);
    out << seg.windows.size() << " windows\n";
    if (config.dump) write_file(config.output_dir / artifact::kWindows, json_text(windows_to_json(seg.windows)));

    std::vector<CandidateSet> sets;
    const int code = extract_into(config, seg, out, config.dump, {}, &sets);
    if (code != kExitOk) return code;
    ensemble_into(config, sets, out);

    if (config.ground_truth) {
        cmd_eval(config, out, config.output_dir / artifact::kFsmJson, *config.ground_truth);
    }
    std::ostringstream cost;
    cmd_cost(config.output_dir / artifact::kExchanges, cost);
    write_file(config.output_dir / artifact::kCostText, cost.str());
    out << cost.str();
    return kExitOk;
}

}  // namespace specfsm
