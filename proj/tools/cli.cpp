#include "cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fscil/commands.hpp"
#include "fscil/error.hpp"
#include "fscil/pipeline.hpp"
#include "fscil/rng.hpp"
#include "fscil/toy_data.hpp"

namespace fscil {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Globals& g) {
  std::vector<std::string> overrides = g.overrides;
  if (g.seed) overrides.push_back("seed=" + std::to_string(*g.seed));
  if (g.config.empty()) return parse_config("{}", overrides, "<defaults>");
  return load_config(g.config, overrides);
}

std::optional<fs::path> out_dir(const Globals& g) {
  if (g.out.empty()) return std::nullopt;
  return fs::path(g.out);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::usage, "bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) fail(ErrorCode::usage, "no seeds given");
  return seeds;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot class-incremental learning experiments", "fscil"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_option("--out", g.out, "Output root (default: $" + std::string(kRunRootEnv) + " or ./runs)");
  app.add_option("--override", g.overrides, "Config override key=value (repeatable)")->take_all();
  app.add_flag("-q,--quiet", g.quiet, "Do not echo progress");

  auto* run = app.add_subcommand("run", "Run one experiment end to end");
  std::string resume;
  int stop_after = -1;
  run->add_option("--resume", resume, "Continue the run in this directory from its newest checkpoint");
  run->add_option("--stop-after", stop_after, "Stop after this session (checkpoints stay resumable)");

  auto* report = app.add_subcommand("report", "Tables and figures from finished runs");
  std::vector<std::string> report_runs;
  report->add_option("runs", report_runs, "Run directories");

  auto* sweep = app.add_subcommand("sweep", "One run per cell of a config grid");
  std::string grid_path;
  sweep->add_option("--grid", grid_path, "Grid JSON: {\"field\": [values]}")->required();

  auto* ablate = app.add_subcommand("ablate", "Stability/adaptability/training ablation grid");
  std::string seeds_text = "0,1,2";
  ablate->add_option("--seeds", seeds_text, "Comma-separated seeds");

  auto* eval = app.add_subcommand("eval", "Re-evaluate a run's checkpoint");
  std::string eval_run;
  std::optional<int> eval_session;
  eval->add_option("run", eval_run, "Run directory")->required();
  eval->add_option("--session", eval_session, "Checkpoint session (default: newest)");

  auto* toy = app.add_subcommand("make-toy", "Export the synthetic dataset as images plus a manifest");
  std::string toy_dir;
  toy->add_option("dir", toy_dir, "Target directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForVersion&) {
    out << library_version() << '\n';
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  }

  try {
    RunCommandOptions options;
    if (!g.quiet) options.echo = &err;

    if (run->parsed()) {
      ExperimentConfig config;
      if (!resume.empty()) {
        options.resume_dir = resume;
        config = g.config.empty() ? load_config(fs::path(resume) / "config.json", g.overrides) : resolve_config(g);
        if (g.config.empty() && g.seed) config.seed = *g.seed;
      } else {
        config = resolve_config(g);
      }
      options.stop_after_session = stop_after;
      const RunOutcome r = cmd_run(config, resolve_run_root(out_dir(g)), options);
      out << r.run_dir.string() << '\n';
      if (r.complete) out << "final accuracy " << format_number(r.record.final_accuracy()) << '\n';
    } else if (report->parsed()) {
      std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
      const auto records = load_records(dirs);
      std::string ids;
      for (const auto& r : records) ids += r.run_id + ";";
      const fs::path target = g.out.empty()
                                  ? resolve_run_root(std::nullopt) /
                                        ("report-" + std::to_string(fnv1a(ids) % 1000000000ULL))
                                  : fs::path(g.out);
      for (const auto& f : write_report(records, target)) out << f.string() << '\n';
    } else if (sweep->parsed()) {
      std::ifstream in(grid_path);
      if (!in) fail(ErrorCode::config, "cannot read grid " + grid_path);
      nlohmann::json grid;
      try {
        grid = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::config, grid_path + ": " + e.what());
      }
      const SweepOutcome s = cmd_sweep(resolve_config(g), grid, resolve_run_root(out_dir(g)), options);
      out << s.dir.string() << '\n' << sweep_summary_markdown(s.ranked);
    } else if (ablate->parsed()) {
      const auto seeds = parse_seeds(seeds_text);
      const AblateOutcome a = cmd_ablate(resolve_config(g), seeds, resolve_run_root(out_dir(g)), options);
      out << a.dir.string() << '\n' << ablation_table_markdown(a.rows);
    } else if (eval->parsed()) {
      const EvalOutcome e = cmd_eval(eval_run, eval_session);
      out << "session " << e.session_index << " accuracy " << format_number(e.record.result.total_accuracy)
          << (e.matches_record ? " (matches record)" : " (differs from record)") << '\n'
          << e.output.string() << '\n';
    } else if (toy->parsed()) {
      const ExperimentConfig config = resolve_config(g);
      out << export_dataset(make_toy_dataset(config.dataset.toy), toy_dir).string() << '\n';
    }
    return exit_code::ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::failure;
  }
}

}  // namespace fscil
