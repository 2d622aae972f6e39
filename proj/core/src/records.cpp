#include "fscil/records.hpp"

#include <fstream>
#include <sstream>

#include "fscil/error.hpp"

namespace fscil {

using nlohmann::json;

std::string library_version() { return FSCIL_VERSION_STRING; }

json to_json(const SessionResult& r) {
  json per_class = json::object();
  for (const auto& [c, acc] : r.per_class_accuracy) per_class[std::to_string(c)] = acc;
  return {{"session", r.session_index},
          {"total_accuracy", r.total_accuracy},
          {"base_accuracy", r.base_accuracy},
          {"novel_accuracy", r.novel_accuracy ? json(*r.novel_accuracy) : json(nullptr)},
          {"per_class_accuracy", per_class},
          {"class_order", r.class_order},
          {"confusion", r.confusion}};
}

SessionResult session_result_from_json(const json& j) {
  SessionResult r;
  r.session_index = j.at("session").get<int>();
  r.total_accuracy = j.at("total_accuracy").get<double>();
  r.base_accuracy = j.at("base_accuracy").get<double>();
  if (!j.at("novel_accuracy").is_null()) r.novel_accuracy = j.at("novel_accuracy").get<double>();
  for (auto it = j.at("per_class_accuracy").begin(); it != j.at("per_class_accuracy").end(); ++it)
    r.per_class_accuracy[std::stoi(it.key())] = it->get<double>();
  r.class_order = j.at("class_order").get<std::vector<int>>();
  r.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
  return r;
}

json to_json(const GeometryReport& g) {
  json inter = json::array();
  for (const auto& e : g.inter_class) inter.push_back({e.a, e.b, e.distance});
  json intra = json::object();
  for (const auto& [c, v] : g.intra_class) intra[std::to_string(c)] = v;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"inter_class", inter},
          {"intra_class", intra},
          {"separation", g.separation},
          {"separation_base", opt(g.separation_base)},
          {"separation_novel", opt(g.separation_novel)}};
}

GeometryReport geometry_report_from_json(const json& j) {
  GeometryReport g;
  for (const auto& e : j.at("inter_class"))
    g.inter_class.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  for (auto it = j.at("intra_class").begin(); it != j.at("intra_class").end(); ++it)
    g.intra_class[std::stoi(it.key())] = it->get<double>();
  g.separation = j.at("separation").get<double>();
  if (!j.at("separation_base").is_null()) g.separation_base = j.at("separation_base").get<double>();
  if (!j.at("separation_novel").is_null()) g.separation_novel = j.at("separation_novel").get<double>();
  return g;
}

json to_json(const SessionRecord& r) { return {{"result", to_json(r.result)}, {"geometry", to_json(r.geometry)}}; }

SessionRecord session_record_from_json(const json& j) {
  return {session_result_from_json(j.at("result")), geometry_report_from_json(j.at("geometry"))};
}

double ExperimentRecord::final_accuracy() const {
  if (sessions.empty()) fail(ErrorCode::empty_input, "record has no sessions");
  return sessions.back().result.total_accuracy;
}

json ExperimentRecord::to_json(bool include_wall_clock) const {
  json sess = json::array();
  for (const auto& s : sessions) sess.push_back(fscil::to_json(s));
  json j = {{"schema_version", schema_version},
            {"run_id", run_id},
            {"name", name},
            {"config_hash", config_hash},
            {"library_version", library_version},
            {"seed", seed},
            {"tricks",
             {{"supcon", tricks.supcon},
              {"etf", tricks.etf},
              {"pseudo", tricks.pseudo},
              {"subnet_tuning", tricks.subnet_tuning},
              {"pretraining", tricks.pretraining},
              {"rotation", tricks.rotation}}},
            {"base_class_ids", base_class_ids},
            {"sessions", sess}};
  if (include_wall_clock)
    j["wall_clock"] = {{"started", wall_clock.started},
                       {"finished", wall_clock.finished},
                       {"seconds", wall_clock.seconds}};
  return j;
}

ExperimentRecord ExperimentRecord::from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version"))
    fail(ErrorCode::schema_mismatch, "record has no schema_version");
  const int version = j.at("schema_version").get<int>();
  if (version != kRecordSchemaVersion)
    fail(ErrorCode::schema_mismatch, "record schema " + std::to_string(version) + ", expected " +
                                         std::to_string(kRecordSchemaVersion));
  try {
    ExperimentRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.library_version = j.at("library_version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("tricks");
    r.tricks = {t.at("supcon").get<bool>(),        t.at("etf").get<bool>(),
                t.at("pseudo").get<bool>(),        t.at("subnet_tuning").get<bool>(),
                t.at("pretraining").get<bool>(),   t.at("rotation").get<bool>()};
    r.base_class_ids = j.at("base_class_ids").get<std::vector<int>>();
    for (const auto& s : j.at("sessions")) r.sessions.push_back(session_record_from_json(s));
    if (j.contains("wall_clock")) {
      const auto& w = j.at("wall_clock");
      r.wall_clock = {w.at("started").get<std::string>(), w.at("finished").get<std::string>(),
                      w.at("seconds").get<double>()};
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_mismatch, std::string("malformed record: ") + e.what());
  }
}

void write_record(const std::filesystem::path& path, const ExperimentRecord& record) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << record.to_json().dump(2) << '\n';
}

ExperimentRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_mismatch, path.string() + ": " + e.what());
  }
  return ExperimentRecord::from_json(j);
}

std::string results_jsonl(const std::vector<SessionRecord>& sessions) {
  std::ostringstream out;
  for (const auto& s : sessions) out << to_json(s).dump() << '\n';
  return out.str();
}

}  // namespace fscil
