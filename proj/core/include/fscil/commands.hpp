#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/config.hpp"
#include "fscil/records.hpp"
#include "fscil/report.hpp"

namespace fscil {

// Environment variable naming the default run root.
inline constexpr const char* kRunRootEnv = "FSCIL_RUN_ROOT";

// --out, else $FSCIL_RUN_ROOT, else ./runs
std::filesystem::path resolve_run_root(const std::optional<std::filesystem::path>& out);

// Deterministic: "<name>-<first 12 hex digits of the config hash>".
std::string run_id_for(const ExperimentConfig& config);

struct RunCommandOptions {
  // Continue the run stored in this directory from its newest checkpoint.
  std::optional<std::filesystem::path> resume_dir;
  int stop_after_session = -1;
  std::ostream* echo = nullptr;  // progress lines, in addition to log.txt
};

struct RunOutcome {
  std::filesystem::path run_dir;
  ExperimentRecord record;
  bool complete = false;
};

/// Runs the pipeline and writes config.json, split.json, results.jsonl,
/// record.json, log.txt and checkpoints/ under a fresh run directory.
RunOutcome cmd_run(const ExperimentConfig& config, const std::filesystem::path& run_root,
                   const RunCommandOptions& options = {});

std::vector<ExperimentRecord> load_records(const std::vector<std::filesystem::path>& run_dirs);
std::vector<std::filesystem::path> cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                                              const std::filesystem::path& out_dir);

// {"dotted.field": [values...], ...}; throws config errors for unknown fields.
void validate_grid(const ExperimentConfig& config, const nlohmann::json& grid);
std::vector<nlohmann::json> grid_cells(const nlohmann::json& grid);
ExperimentConfig apply_assignment(const ExperimentConfig& config, const nlohmann::json& assignment);

struct SweepOutcome {
  std::filesystem::path dir;
  std::vector<SweepCell> ranked;
  std::vector<RunOutcome> runs;  // grid order
};

SweepOutcome cmd_sweep(const ExperimentConfig& config, const nlohmann::json& grid,
                       const std::filesystem::path& run_root, const RunCommandOptions& options = {});

struct AblateOutcome {
  std::filesystem::path dir;
  std::vector<AblationRow> rows;
  std::map<std::string, double> category_drops;
};

// Mean final accuracy lost when one trick category is removed from the all-on cell.
std::map<std::string, double> ablation_category_drops(const std::vector<AblationRow>& rows);

AblateOutcome cmd_ablate(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                         const std::filesystem::path& run_root, const RunCommandOptions& options = {});

struct EvalOutcome {
  SessionRecord record;
  int session_index = 0;
  bool matches_record = false;
  std::filesystem::path output;
};

/// Re-evaluates a checkpoint of a run directory (newest unless `session` is given).
EvalOutcome cmd_eval(const std::filesystem::path& run_dir, std::optional<int> session = std::nullopt);

}  // namespace fscil
