#pragma once

#include "specfsm/ensemble.hpp"
#include "specfsm/fsm.hpp"
#include "specfsm/preproc.hpp"
#include "specfsm/prompting.hpp"
#include "specfsm/providers.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace specfsm {

struct ConcurrencySettings {
    std::size_t global_cap = 4;
    std::size_t per_provider_cap = 2;
};

struct RunConfig {
    std::filesystem::path document;
    std::string doc_id;
    std::string spec_version;
    ProtocolProfile profile;
    std::vector<ProviderConfig> providers;
    std::optional<std::filesystem::path> templates_dir;
    AlignmentParams alignment;
    std::size_t max_words = kDefaultMaxWords;
    ContextPolicy context;
    ReferencePolicy references;
    /// Further specifications whose sections may be cited by the main document.
    std::vector<std::filesystem::path> reference_documents;
    StateDenylist denylist = StateDenylist::defaults();
    CleaningRules cleaning = CleaningRules::defaults();
    std::filesystem::path output_dir = "out";
    bool dump = false;
    ConcurrencySettings concurrency;
    std::optional<std::filesystem::path> ground_truth;
    std::optional<std::filesystem::path> replay_dir;
};

/// Relative paths are resolved against `base_dir`. Throws Error(Config) on a
/// schema problem, no providers or a referenced path that does not exist.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace specfsm
