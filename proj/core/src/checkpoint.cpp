#include <algorithm>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fscil/error.hpp"
#include "fscil/pipeline.hpp"
#include "fscil/records.hpp"

namespace fscil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "fscil-checkpoint";

json log_json(const TrainingLog& log) {
  return {{"epoch_loss", log.epoch_loss},
          {"etf_assignment_epoch", log.etf_assignment_epoch ? json(*log.etf_assignment_epoch) : json(nullptr)},
          {"events", log.events}};
}

TrainingLog log_from_json(const json& j) {
  TrainingLog log;
  log.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  if (!j.at("etf_assignment_epoch").is_null()) log.etf_assignment_epoch = j.at("etf_assignment_epoch").get<int>();
  log.events = j.at("events").get<std::vector<std::string>>();
  return log;
}

}  // namespace

void write_checkpoint(const fs::path& dir, const ExperimentConfig& config, const RunState& state) {
  const fs::path target = dir / ("session_" + std::to_string(state.session_index));
  const fs::path staging = dir / (".staging_" + std::to_string(state.session_index));
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging);

  write_parameters(staging / "encoder.bin", state.encoder.params);
  write_prototype_table(staging / "classifier.bin", to_table(state.classifier));
  if (state.mask) write_mask(staging / "mask.json", *state.mask);

  json results = json::array();
  for (const auto& r : state.results) results.push_back(to_json(r));
  const auto& in = state.encoder.arch.input;
  const json meta = {{"format", kCheckpointFormat},
                     {"library_version", library_version()},
                     {"config_hash", config.hash()},
                     {"stage", to_string(state.stage)},
                     {"session_index", state.session_index},
                     {"input", {in.channels, in.height, in.width}},
                     {"base_class_ids", state.base_class_ids},
                     {"has_mask", state.mask.has_value()},
                     {"pretrain_log", log_json(state.pretrain_log)},
                     {"base_log", log_json(state.base_log)},
                     {"results", results}};
  {
    std::ofstream out(staging / "state.json");
    if (!out) fail(ErrorCode::io, "cannot write checkpoint under " + staging.string());
    out << meta.dump(1) << '\n';
  }
  fs::remove_all(target, ec);
  fs::rename(staging, target);
}

RunState read_checkpoint(const fs::path& session_dir, const ExperimentConfig& config) {
  json meta;
  {
    std::ifstream in(session_dir / "state.json");
    if (!in) fail(ErrorCode::corrupt_checkpoint, "missing " + (session_dir / "state.json").string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::corrupt_checkpoint, std::string("unreadable checkpoint state: ") + e.what());
    }
  }
  try {
    if (meta.at("format").get<std::string>() != kCheckpointFormat)
      fail(ErrorCode::corrupt_checkpoint, "not a checkpoint: " + session_dir.string());
    if (meta.at("config_hash").get<std::string>() != config.hash())
      fail(ErrorCode::version_mismatch, "checkpoint was written for config " +
                                            meta.at("config_hash").get<std::string>() + ", current config is " +
                                            config.hash());
    if (meta.at("library_version").get<std::string>() != library_version())
      fail(ErrorCode::version_mismatch, "checkpoint was written by version " +
                                            meta.at("library_version").get<std::string>());

    RunState state;
    state.stage = parse_stage(meta.at("stage").get<std::string>());
    state.session_index = meta.at("session_index").get<int>();
    const auto input = meta.at("input").get<std::vector<int>>();
    if (input.size() != 3) fail(ErrorCode::corrupt_checkpoint, "bad input shape in checkpoint");
    state.encoder.arch = build_architecture(config, {input[0], input[1], input[2]});
    state.encoder.params = read_parameters(session_dir / "encoder.bin");
    if (!state.encoder.params.same_layout(init_parameters(state.encoder.arch, 0)))
      fail(ErrorCode::corrupt_checkpoint, "encoder parameters do not match the configured architecture");
    state.classifier = classifier_from_table(read_prototype_table(session_dir / "classifier.bin"));
    if (meta.at("has_mask").get<bool>()) {
      state.mask = read_mask(session_dir / "mask.json");
      if (!state.mask->matches(state.encoder.params))
        fail(ErrorCode::corrupt_checkpoint, "mask does not match encoder parameters");
    }
    state.base_class_ids = meta.at("base_class_ids").get<std::vector<int>>();
    state.pretrain_log = log_from_json(meta.at("pretrain_log"));
    state.base_log = log_from_json(meta.at("base_log"));
    for (const auto& r : meta.at("results")) state.results.push_back(session_record_from_json(r));
    if (static_cast<int>(state.results.size()) != state.session_index + 1)
      fail(ErrorCode::corrupt_checkpoint, "checkpoint results do not cover every finished session");
    return state;
  } catch (const json::exception& e) {
    fail(ErrorCode::corrupt_checkpoint, std::string("malformed checkpoint state: ") + e.what());
  }
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  std::optional<fs::path> best;
  int best_index = -1;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("session_", 0) != 0) continue;
    if (!fs::exists(entry.path() / "state.json")) continue;
    try {
      const int index = std::stoi(name.substr(8));
      if (index > best_index) {
        best_index = index;
        best = entry.path();
      }
    } catch (const std::exception&) {
    }
  }
  return best;
}

}  // namespace fscil
