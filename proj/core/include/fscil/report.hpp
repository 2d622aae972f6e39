#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/pipeline.hpp"
#include "fscil/records.hpp"

namespace fscil {

// Shortest decimal that round-trips to the same double.
std::string format_number(double value);

/// Per-session accuracy table, one row per session and one column per run,
/// followed by delta columns against the first run.
std::string accuracy_table_markdown(const std::vector<ExperimentRecord>& records);
std::string accuracy_table_csv(const std::vector<ExperimentRecord>& records);

/// Final accuracy per run with its difference to the first run.
std::string final_accuracy_markdown(const std::vector<ExperimentRecord>& records);

std::string sources_footer(const std::vector<ExperimentRecord>& records);

/// Writes tables, figures and their plotted data into `out_dir`; returns the
/// files written. Throws usage on an empty list.
std::vector<std::filesystem::path> write_report(const std::vector<ExperimentRecord>& records,
                                                const std::filesystem::path& out_dir);

struct SweepCell {
  nlohmann::json assignment;  // field -> value
  std::string run_id;
  std::optional<double> final_accuracy;  // empty when the cell diverged
  std::string status = "ok";
};

// Cells ranked by final accuracy, best first; diverged cells last.
std::vector<SweepCell> rank_sweep(std::vector<SweepCell> cells);
std::string sweep_summary_markdown(const std::vector<SweepCell>& ranked);
nlohmann::json sweep_summary_json(const std::vector<SweepCell>& ranked);

struct AblationRow {
  AblationCell cell;
  std::vector<std::string> run_ids;
};

/// Stability / adaptability / training check marks with seed-averaged final
/// accuracy and the drop relative to the all-on row.
std::string ablation_table_markdown(const std::vector<AblationRow>& rows);
nlohmann::json ablation_table_json(const std::vector<AblationRow>& rows);

}  // namespace fscil
