#include "specfsm/config.hpp"

#include "specfsm/error.hpp"

#include <fstream>
#include <regex>

namespace specfsm {

namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

fs::path existing(const fs::path& base, const std::string& p, const char* what) {
    auto path = resolve(base, p);
    if (!fs::exists(path)) throw Error(ErrorKind::Config, std::string(what) + " not found: " + path.string());
    return path;
}

ProviderConfig provider_from_json(const nlohmann::json& j) {
    ProviderConfig p;
    p.name = j.at("name").get<std::string>();
    if (p.name.empty()) throw Error(ErrorKind::Config, "provider name must not be empty");
    p.endpoint_url = j.value("endpoint_url", "");
    p.model_id = j.value("model_id", "");
    p.api_key_env = j.value("api_key_env", "");
    p.temperature = j.value("temperature", p.temperature);
    p.max_retries = j.value("max_retries", p.max_retries);
    p.timeout_seconds = j.value("timeout_seconds", p.timeout_seconds);
    if (p.max_retries < 0) throw Error(ErrorKind::Config, "max_retries must be >= 0 for " + p.name);
    return p;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    RunConfig c;
    try {
        if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
        c.document = existing(base_dir, j.at("document").get<std::string>(), "document");
        c.doc_id = j.value("doc_id", c.document.stem().string());
        c.spec_version = j.value("spec_version", "");

        const auto& prof = j.at("profile");
        c.profile.protocol = prof.at("name").get<std::string>();
        c.profile.style = parse_protocol_style(prof.value("style", "state_oriented"));
        c.profile.known_prefixes = prof.value("prefixes", std::vector<std::string>{});
        c.profile.layer_tags = prof.value("layer_tags", std::vector<std::string>{});

        for (const auto& p : j.at("providers")) c.providers.push_back(provider_from_json(p));
        if (c.providers.empty()) throw Error(ErrorKind::Config, "at least one provider is required");
        for (std::size_t a = 0; a < c.providers.size(); ++a) {
            for (std::size_t b = a + 1; b < c.providers.size(); ++b) {
                if (c.providers[a].name == c.providers[b].name) {
                    throw Error(ErrorKind::Config, "duplicate provider name " + c.providers[a].name);
                }
            }
        }

        if (j.contains("templates_dir")) {
            c.templates_dir = existing(base_dir, j["templates_dir"].get<std::string>(), "templates_dir");
        }
        c.alignment.theta = j.value("theta", c.alignment.theta);
        c.alignment.vote_threshold = j.value("vote_threshold", c.alignment.vote_threshold);
        c.max_words = j.value("max_words", c.max_words);
        if (c.max_words == 0) throw Error(ErrorKind::Config, "max_words must be positive");

        if (j.contains("context")) {
            c.context.word_budget = j["context"].value("word_budget", c.context.word_budget);
            c.context.tail_k = j["context"].value("tail_k", c.context.tail_k);
        }
        if (j.contains("references")) {
            const auto& r = j["references"];
            c.references.words_per_reference = r.value("words_per_reference", c.references.words_per_reference);
            c.references.max_references = r.value("max_references", c.references.max_references);
        }
        for (const auto& d : j.value("reference_documents", std::vector<std::string>{})) {
            c.reference_documents.push_back(existing(base_dir, d, "reference document"));
        }
        if (j.contains("denylist")) c.denylist = StateDenylist(j["denylist"].get<std::vector<std::string>>());

        if (j.contains("cleaning")) {
            const auto& cl = j["cleaning"];
            if (cl.contains("drop_line_patterns")) {
                c.cleaning.drop_line_patterns = cl["drop_line_patterns"].get<std::vector<std::string>>();
            }
            for (const auto& p : cl.value("extra_drop_line_patterns", std::vector<std::string>{})) {
                c.cleaning.drop_line_patterns.push_back(p);
            }
            c.cleaning.strip_footnote_markers = cl.value("strip_footnote_markers", c.cleaning.strip_footnote_markers);
            c.cleaning.max_noise_line_length = cl.value("max_noise_line_length", c.cleaning.max_noise_line_length);
            for (const auto& p : c.cleaning.drop_line_patterns) {
                try {
                    std::regex re(p);
                } catch (const std::regex_error& e) {
                    throw Error(ErrorKind::Config, "bad cleaning pattern '" + p + "': " + e.what());
                }
            }
        }

        c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
        c.dump = j.value("dump", false);
        if (j.contains("concurrency")) {
            c.concurrency.global_cap = j["concurrency"].value("global", c.concurrency.global_cap);
            c.concurrency.per_provider_cap = j["concurrency"].value("per_provider", c.concurrency.per_provider_cap);
            if (c.concurrency.global_cap == 0 || c.concurrency.per_provider_cap == 0) {
                throw Error(ErrorKind::Config, "concurrency caps must be positive");
            }
        }
        if (j.contains("ground_truth")) {
            c.ground_truth = existing(base_dir, j["ground_truth"].get<std::string>(), "ground_truth");
        }
        if (j.contains("replay_dir")) {
            c.replay_dir = existing(base_dir, j["replay_dir"].get<std::string>(), "replay_dir");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("malformed config: ") + e.what());
    }
    c.alignment.validate(static_cast<int>(c.providers.size()));
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + " is not JSON: " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

}  // namespace specfsm
