#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/config.hpp"
#include "fscil/metrics.hpp"

namespace fscil {

struct SessionRecord {
  SessionResult result;
  GeometryReport geometry;
};

nlohmann::json to_json(const SessionResult& result);
SessionResult session_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeometryReport& report);
GeometryReport geometry_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionRecord& record);
SessionRecord session_record_from_json(const nlohmann::json& j);

inline constexpr int kRecordSchemaVersion = 1;

/// Everything a finished run reports. Only `wall_clock` varies between two
/// runs of the same config.
struct ExperimentRecord {
  int schema_version = kRecordSchemaVersion;
  std::string run_id;
  std::string name;
  std::string config_hash;
  std::string library_version;
  std::uint64_t seed = 0;
  TrickToggles tricks;
  std::vector<int> base_class_ids;
  std::vector<SessionRecord> sessions;
  struct WallClock {
    std::string started;
    std::string finished;
    double seconds = 0.0;
  } wall_clock;

  double final_accuracy() const;

  nlohmann::json to_json(bool include_wall_clock = true) const;
  // Throws schema-mismatch on a wrong version or a missing field.
  static ExperimentRecord from_json(const nlohmann::json& j);
};

void write_record(const std::filesystem::path& path, const ExperimentRecord& record);
ExperimentRecord read_record(const std::filesystem::path& path);

// One JSON line per session; byte-stable for a fixed config and seed.
std::string results_jsonl(const std::vector<SessionRecord>& sessions);

std::string library_version();

}  // namespace fscil
