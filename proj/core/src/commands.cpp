#include "fscil/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "fscil/error.hpp"
#include "fscil/pipeline.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

fs::path unique_dir(const fs::path& parent, const std::string& name) {
  fs::path dir = parent / name;
  for (int k = 1; fs::exists(dir); ++k) dir = parent / (name + "." + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

std::string short_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return std::string(buf, 12);
}

}  // namespace

fs::path resolve_run_root(const std::optional<fs::path>& out) {
  if (out) return *out;
  if (const char* env = std::getenv(kRunRootEnv); env && *env) return env;
  return "runs";
}

std::string run_id_for(const ExperimentConfig& config) { return config.name + "-" + config.hash().substr(0, 12); }

RunOutcome cmd_run(const ExperimentConfig& config, const fs::path& run_root, const RunCommandOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  const Dataset dataset = load_dataset(config.dataset);

  RunOutcome outcome;
  TaskStream stream;
  if (options.resume_dir) {
    outcome.run_dir = *options.resume_dir;
    if (!fs::exists(outcome.run_dir / "split.json"))
      fail(ErrorCode::corrupt_checkpoint, "no run to resume in " + outcome.run_dir.string());
    stream = stream_from_split(dataset, read_split(outcome.run_dir / "split.json"));
  } else {
    stream = build_task_stream(dataset, stream_params(config));
    outcome.run_dir = unique_dir(run_root, run_id_for(config));
    write_file(outcome.run_dir / "config.json", config.to_json().dump(2) + "\n");
    write_split(outcome.run_dir / "split.json", realized_split(stream));
  }

  std::ofstream log(outcome.run_dir / "log.txt", std::ios::app);
  RunOptions run;
  run.checkpoint_dir = outcome.run_dir / "checkpoints";
  run.stop_after_session = options.stop_after_session;
  run.sink = [&](const std::string& line) {
    log << line << '\n';
    if (options.echo) *options.echo << line << '\n';
  };
  run.sink("run " + run_id_for(config) + " config " + config.hash() + " version " + library_version());

  RunState state = options.resume_dir ? resume_pipeline(config, stream, run) : run_pipeline(config, stream, run);
  outcome.complete = state.session_index + 1 == stream.session_count();

  if (outcome.complete && fs::exists(outcome.run_dir / "record.json")) {
    outcome.record = read_record(outcome.run_dir / "record.json");
    return outcome;
  }

  ExperimentRecord& rec = outcome.record;
  rec.run_id = run_id_for(config);
  rec.name = config.name;
  rec.config_hash = config.hash();
  rec.library_version = library_version();
  rec.seed = config.seed;
  rec.tricks = config.tricks;
  rec.base_class_ids = state.base_class_ids;
  rec.sessions = state.results;
  rec.wall_clock.started = started_at;
  rec.wall_clock.finished = utc_now();
  rec.wall_clock.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  write_file(outcome.run_dir / "results.jsonl", results_jsonl(state.results));
  if (outcome.complete) {
    write_record(outcome.run_dir / "record.json", rec);
    run.sink("record written");
  } else {
    run.sink("stopped after session " + std::to_string(state.session_index));
  }
  return outcome;
}

std::vector<ExperimentRecord> load_records(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) fail(ErrorCode::usage, "no run directories given");
  std::vector<ExperimentRecord> out;
  for (const auto& dir : run_dirs) {
    const fs::path path = fs::is_directory(dir) ? dir / "record.json" : dir;
    if (!fs::exists(path)) fail(ErrorCode::data, "no record at " + path.string());
    out.push_back(read_record(path));
  }
  return out;
}

std::vector<fs::path> cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  return write_report(load_records(run_dirs), out_dir);
}

void validate_grid(const ExperimentConfig& config, const json& grid) {
  if (!grid.is_object() || grid.empty()) fail(ErrorCode::config, "sweep grid must be a non-empty object");
  const json doc = config.to_json();
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    const json* node = &doc;
    std::stringstream ss(it.key());
    std::string part;
    while (std::getline(ss, part, '.')) {
      if (!node->is_object() || !node->contains(part))
        fail(ErrorCode::config, "sweep grid names unknown field '" + it.key() + "'");
      node = &node->at(part);
    }
    if (node->is_object()) fail(ErrorCode::config, "sweep field '" + it.key() + "' is a section, not a value");
    if (!it->is_array() || it->empty())
      fail(ErrorCode::config, "sweep field '" + it.key() + "' needs a non-empty list of values");
  }
  for (const auto& cell : grid_cells(grid)) apply_assignment(config, cell);
}

std::vector<json> grid_cells(const json& grid) {
  std::vector<json> cells{json::object()};
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    std::vector<json> next;
    for (const auto& cell : cells)
      for (const auto& v : *it) {
        json c = cell;
        c[it.key()] = v;
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }
  return cells;
}

ExperimentConfig apply_assignment(const ExperimentConfig& config, const json& assignment) {
  json doc = config.to_json();
  for (auto it = assignment.begin(); it != assignment.end(); ++it) apply_override(doc, it.key() + "=" + it->dump());
  return ExperimentConfig::from_json(doc);
}

SweepOutcome cmd_sweep(const ExperimentConfig& config, const json& grid, const fs::path& run_root,
                       const RunCommandOptions& options) {
  validate_grid(config, grid);
  SweepOutcome out;
  out.dir = unique_dir(run_root, "sweep-" + short_hash(config.hash() + grid.dump()));
  write_file(out.dir / "grid.json", grid.dump(2) + "\n");
  write_file(out.dir / "config.json", config.to_json().dump(2) + "\n");
  std::vector<SweepCell> cells;
  for (const auto& assignment : grid_cells(grid)) {
    const ExperimentConfig cfg = apply_assignment(config, assignment);
    SweepCell cell;
    cell.assignment = assignment;
    cell.run_id = run_id_for(cfg);
    try {
      RunCommandOptions cell_options = options;
      cell_options.resume_dir.reset();
      cell_options.stop_after_session = -1;
      RunOutcome r = cmd_run(cfg, out.dir / "cells", cell_options);
      cell.final_accuracy = r.record.final_accuracy();
      out.runs.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::divergence) throw;
      cell.status = "diverged";
    }
    cells.push_back(std::move(cell));
  }
  out.ranked = rank_sweep(std::move(cells));
  write_file(out.dir / "summary.md", sweep_summary_markdown(out.ranked));
  write_file(out.dir / "summary.json", sweep_summary_json(out.ranked).dump(2) + "\n");
  return out;
}

std::map<std::string, double> ablation_category_drops(const std::vector<AblationRow>& rows) {
  auto mean_of = [&](const TrickToggles& t) -> std::optional<double> {
    for (const auto& r : rows)
      if (r.cell.toggles == t) return r.cell.mean_final_accuracy();
    return std::nullopt;
  };
  std::map<std::string, double> drops;
  const auto top = mean_of(TrickToggles::groups(true, true, true));
  if (!top) return drops;
  const std::pair<const char*, TrickToggles> removed[] = {{"stability", TrickToggles::groups(false, true, true)},
                                                          {"adaptability", TrickToggles::groups(true, false, true)},
                                                          {"training", TrickToggles::groups(true, true, false)}};
  for (const auto& [name, t] : removed)
    if (const auto v = mean_of(t)) drops[name] = *top - *v;
  return drops;
}

AblateOutcome cmd_ablate(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                         const fs::path& run_root, const RunCommandOptions& options) {
  if (seeds.empty()) fail(ErrorCode::usage, "ablation needs at least one seed");
  config.validate();
  AblateOutcome out;
  std::string seed_text;
  for (auto s : seeds) seed_text += std::to_string(s) + ",";
  out.dir = unique_dir(run_root, "ablation-" + short_hash(config.hash() + seed_text));
  for (const auto& toggles : ablation_grid_toggles()) {
    AblationRow row;
    row.cell.toggles = toggles;
    for (auto seed : seeds) {
      ExperimentConfig cfg = config;
      cfg.tricks = toggles;
      cfg.seed = seed;
      RunCommandOptions cell_options = options;
      cell_options.resume_dir.reset();
      cell_options.stop_after_session = -1;
      const RunOutcome r = cmd_run(cfg, out.dir / "cells", cell_options);
      const auto& last = r.record.sessions.back().result;
      row.cell.seeds.push_back(seed);
      row.cell.final_accuracy.push_back(last.total_accuracy);
      row.cell.final_base_accuracy.push_back(last.base_accuracy);
      row.cell.final_novel_accuracy.push_back(last.novel_accuracy.value_or(0.0));
      row.run_ids.push_back(r.record.run_id);
    }
    out.rows.push_back(std::move(row));
  }
  out.category_drops = ablation_category_drops(out.rows);
  std::string md = ablation_table_markdown(out.rows);
  md += "\n| removed category | drop in mean final accuracy |\n|---|---|\n";
  for (const auto& [name, drop] : out.category_drops) md += "| " + name + " | " + format_number(drop) + " |\n";
  json j = ablation_table_json(out.rows);
  j["category_drops"] = out.category_drops;
  write_file(out.dir / "ablation.md", md);
  write_file(out.dir / "ablation.json", j.dump(2) + "\n");
  return out;
}

EvalOutcome cmd_eval(const fs::path& run_dir, std::optional<int> session) {
  if (!fs::exists(run_dir / "config.json")) fail(ErrorCode::data, "no run directory at " + run_dir.string());
  const ExperimentConfig config = load_config(run_dir / "config.json");
  const Dataset dataset = load_dataset(config.dataset);
  const TaskStream stream = stream_from_split(dataset, read_split(run_dir / "split.json"));
  fs::path ckpt;
  if (session) {
    ckpt = run_dir / "checkpoints" / ("session_" + std::to_string(*session));
  } else {
    const auto latest = latest_checkpoint(run_dir / "checkpoints");
    if (!latest) fail(ErrorCode::corrupt_checkpoint, "no checkpoint in " + run_dir.string());
    ckpt = *latest;
  }
  const RunState state = read_checkpoint(ckpt, config);
  EvalOutcome out;
  out.session_index = state.session_index;
  out.record = evaluate_state(config, state, stream, state.session_index);
  out.matches_record = to_json(out.record) == to_json(state.results.back());
  fs::create_directories(run_dir / "eval");
  out.output = run_dir / "eval" / ("session_" + std::to_string(state.session_index) + ".json");
  json j = to_json(out.record);
  j["matches_record"] = out.matches_record;
  j["source_run"] = run_id_for(config);
  write_file(out.output, j.dump(2) + "\n");
  return out;
}

}  // namespace fscil
