#pragma once

#include "specfsm/config.hpp"
#include "specfsm/error.hpp"
#include "specfsm/evalkit.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace specfsm {

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<double> theta;
    std::optional<int> votes;
    std::optional<std::size_t> max_words;
    bool dump = false;
    std::optional<std::filesystem::path> replay_dir;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::filesystem::path> truth;
};

void apply_overrides(RunConfig& config, const Overrides& o);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitProvider = 2;
inline constexpr int kExitSchema = 3;

int exit_code_for(ErrorKind kind) noexcept;

/// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kWindows = "windows.json";
inline constexpr const char* kCandidatesDir = "candidates";
inline constexpr const char* kExchanges = "exchanges.jsonl";
inline constexpr const char* kFsmJson = "fsm.json";
inline constexpr const char* kFsmDot = "fsm.dot";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kCostText = "cost.txt";
}  // namespace artifact

/// Builds the client for one configured provider. The default serves replay
/// fixtures from <replay_dir>/<name> when a replay directory is set and calls
/// the HTTP endpoint otherwise.
using ProviderFactory = std::function<std::shared_ptr<ChatProvider>(const ProviderConfig&)>;

ProviderFactory default_provider_factory(const RunConfig& config);

/// Clean, build the tree, merge; writes windows.json and prints the count.
Segmentation cmd_segment(const RunConfig& config, std::ostream& out);

/// Both extraction phases for every provider. Candidate sets are written when
/// `write_candidates` is set; the exchange log always is. Returns 0, or the
/// provider exit code if any provider failed hard.
int cmd_extract(const RunConfig& config, std::ostream& out, bool write_candidates = true,
                const ProviderFactory& factory = {});

/// Reads candidates/<provider>.json for each configured provider (or the
/// given files), votes and writes fsm.json and fsm.dot.
Fsm cmd_ensemble(const RunConfig& config, std::ostream& out,
                 const std::vector<std::filesystem::path>& candidate_files = {});

/// Writes report.json and report.txt. Throws Error(Schema) on a malformed
/// prediction or truth file.
EvalReport cmd_eval(const RunConfig& config, std::ostream& out, const std::filesystem::path& fsm_path,
                    const std::filesystem::path& truth_path);

std::vector<CostRow> cmd_cost(const std::filesystem::path& exchange_log, std::ostream& out);

/// segment, extract, ensemble, then eval when a ground truth is configured and
/// cost. Returns the exit code.
int cmd_run(const RunConfig& config, std::ostream& out);

}  // namespace specfsm
