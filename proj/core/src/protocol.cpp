#include "fscil/protocol.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> Dataset::class_ids() const {
  std::set<int> ids;
  for (const auto& s : train) ids.insert(s.label);
  for (const auto& s : test) ids.insert(s.label);
  return {ids.begin(), ids.end()};
}

std::vector<int> TaskStream::seen_classes(int t) const {
  std::vector<int> out;
  for (int s = 0; s <= t && s < session_count(); ++s)
    out.insert(out.end(), sessions[s].class_ids.begin(), sessions[s].class_ids.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::map<int, std::vector<const LabeledSample*>> group_by_label(const std::vector<LabeledSample>& samples) {
  std::map<int, std::vector<const LabeledSample*>> groups;
  for (const auto& s : samples) groups[s.label].push_back(&s);
  // Order within a class depends only on sample ids, not on input order.
  for (auto& [label, members] : groups)
    std::sort(members.begin(), members.end(),
              [](const LabeledSample* a, const LabeledSample* b) { return a->sample_id < b->sample_id; });
  return groups;
}

void fill_test_sets(const Dataset& dataset, TaskStream& stream) {
  const auto test_groups = group_by_label(dataset.test);
  std::vector<LabeledSample> cumulative;
  for (const auto& session : stream.sessions) {
    for (int c : session.class_ids) {
      if (auto it = test_groups.find(c); it != test_groups.end())
        for (const auto* s : it->second) cumulative.push_back(*s);
    }
    stream.test_sets.push_back(cumulative);
  }
}

}  // namespace

TaskStream build_task_stream(const Dataset& dataset, const StreamParams& params) {
  if (params.base_classes <= 0 || params.sessions < 0 || (params.sessions > 0 && params.ways <= 0) ||
      (params.sessions > 0 && params.shots <= 0))
    fail(ErrorCode::invalid_argument, "stream parameters must be positive");

  std::vector<int> classes = dataset.class_ids();
  const long needed = params.base_classes + static_cast<long>(params.ways) * params.sessions;
  if (needed > static_cast<long>(classes.size()))
    fail(ErrorCode::insufficient_classes, "stream needs " + std::to_string(needed) + " classes, dataset has " +
                                              std::to_string(classes.size()));
  if (params.shuffle_classes) {
    Rng rng(derive_seed(params.seed, "class-order"));
    std::shuffle(classes.begin(), classes.end(), rng);
  }

  const auto train_groups = group_by_label(dataset.train);
  TaskStream stream;

  SessionSpec base;
  base.index = 0;
  base.class_ids.assign(classes.begin(), classes.begin() + params.base_classes);
  std::vector<LabeledSample> base_train;
  for (int c : base.class_ids) {
    if (auto it = train_groups.find(c); it != train_groups.end())
      for (const auto* s : it->second) base_train.push_back(*s);
  }
  stream.sessions.push_back(std::move(base));
  stream.train_sets.push_back(std::move(base_train));

  auto next = classes.begin() + params.base_classes;
  for (int t = 1; t <= params.sessions; ++t) {
    SessionSpec session;
    session.index = t;
    session.shots_per_class = params.shots;
    session.class_ids.assign(next, next + params.ways);
    next += params.ways;

    std::vector<LabeledSample> train;
    for (int c : session.class_ids) {
      auto it = train_groups.find(c);
      const std::size_t available = it == train_groups.end() ? 0 : it->second.size();
      if (available < static_cast<std::size_t>(params.shots))
        fail(ErrorCode::insufficient_shots, "class " + std::to_string(c) + " has " + std::to_string(available) +
                                                " training samples, needs " + std::to_string(params.shots));
      std::vector<std::size_t> order(available);
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(params.seed, "shots", static_cast<std::uint64_t>(c)));
      std::shuffle(order.begin(), order.end(), rng);
      for (int k = 0; k < params.shots; ++k) train.push_back(*it->second[order[k]]);
    }
    stream.sessions.push_back(std::move(session));
    stream.train_sets.push_back(std::move(train));
  }

  fill_test_sets(dataset, stream);
  validate_stream(stream);
  return stream;
}

const std::vector<LabeledSample>& cumulative_test_set(const TaskStream& stream, int t) {
  if (t < 0 || t >= stream.session_count())
    fail(ErrorCode::out_of_range, "session index " + std::to_string(t) + " outside [0, " +
                                      std::to_string(stream.session_count()) + ")");
  return stream.test_sets[static_cast<std::size_t>(t)];
}

void validate_stream(const TaskStream& stream) {
  const auto n = stream.sessions.size();
  if (n == 0 || stream.train_sets.size() != n || stream.test_sets.size() != n)
    fail(ErrorCode::data, "stream is missing per-session sets");
  std::set<int> seen;
  std::size_t previous_test = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& session = stream.sessions[t];
    std::set<int> own(session.class_ids.begin(), session.class_ids.end());
    for (int c : own)
      if (!seen.insert(c).second)
        fail(ErrorCode::label_overlap, "class " + std::to_string(c) + " appears in more than one session");

    std::map<int, int> counts;
    for (const auto& s : stream.train_sets[t]) {
      if (!own.count(s.label))
        fail(ErrorCode::data, "session " + std::to_string(t) + " train label " + std::to_string(s.label) +
                                  " outside its class set");
      ++counts[s.label];
    }
    if (t > 0 && session.shots_per_class) {
      for (int c : own)
        if (counts[c] != *session.shots_per_class)
          fail(ErrorCode::data, "session " + std::to_string(t) + " class " + std::to_string(c) + " has " +
                                    std::to_string(counts[c]) + " shots");
    }
    for (const auto& s : stream.test_sets[t])
      if (!seen.count(s.label))
        fail(ErrorCode::data, "test set " + std::to_string(t) + " contains unseen class " + std::to_string(s.label));
    if (stream.test_sets[t].size() < previous_test) fail(ErrorCode::data, "cumulative test set shrank");
    previous_test = stream.test_sets[t].size();
  }
}

RealizedSplit realized_split(const TaskStream& stream) {
  RealizedSplit split;
  for (std::size_t t = 0; t < stream.sessions.size(); ++t) {
    RealizedSplit::Session s;
    s.index = stream.sessions[t].index;
    s.class_ids = stream.sessions[t].class_ids;
    s.shots = stream.sessions[t].shots_per_class;
    for (const auto& sample : stream.train_sets[t]) s.train_ids.push_back(sample.sample_id);
    split.sessions.push_back(std::move(s));
  }
  return split;
}

void write_split(const fs::path& path, const RealizedSplit& split) {
  json doc;
  doc["format"] = "fscil-split";
  doc["version"] = 1;
  doc["sessions"] = json::array();
  for (const auto& s : split.sessions) {
    json j;
    j["index"] = s.index;
    j["class_ids"] = s.class_ids;
    j["shots"] = s.shots ? json(*s.shots) : json(nullptr);
    j["train_ids"] = s.train_ids;
    doc["sessions"].push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write split " + path.string());
  out << doc.dump(1) << '\n';
}

RealizedSplit read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read split " + path.string());
  RealizedSplit split;
  try {
    const json doc = json::parse(in);
    if (doc.value("format", "") != "fscil-split") fail(ErrorCode::data, "not a split file: " + path.string());
    for (const auto& j : doc.at("sessions")) {
      RealizedSplit::Session s;
      s.index = j.at("index").get<int>();
      s.class_ids = j.at("class_ids").get<std::vector<int>>();
      if (!j.at("shots").is_null()) s.shots = j.at("shots").get<int>();
      s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
      split.sessions.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::data, "malformed split " + path.string() + ": " + e.what());
  }
  return split;
}

TaskStream stream_from_split(const Dataset& dataset, const RealizedSplit& split) {
  std::map<std::string, const LabeledSample*> by_id;
  for (const auto& s : dataset.train) by_id[s.sample_id] = &s;
  TaskStream stream;
  for (const auto& s : split.sessions) {
    SessionSpec spec;
    spec.index = s.index;
    spec.class_ids = s.class_ids;
    spec.shots_per_class = s.shots;
    std::vector<LabeledSample> train;
    for (const auto& id : s.train_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) fail(ErrorCode::data, "split references unknown sample " + id);
      train.push_back(*it->second);
    }
    stream.sessions.push_back(std::move(spec));
    stream.train_sets.push_back(std::move(train));
  }
  fill_test_sets(dataset, stream);
  validate_stream(stream);
  return stream;
}

Dataset load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorCode::io, "cannot open manifest " + manifest.string());
  const fs::path root = manifest.parent_path();
  Dataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      fs::path p = rec.at("path").get<std::string>();
      if (p.is_relative()) p = root / p;
      LabeledSample s;
      s.label = rec.at("label").get<int>();
      s.sample_id = rec.contains("id") ? rec["id"].get<std::string>() : rec.at("path").get<std::string>();
      s.image = read_netpbm(p);
      const auto split = rec.at("split").get<std::string>();
      if (split == "train") {
        dataset.train.push_back(std::move(s));
      } else if (split == "test") {
        dataset.test.push_back(std::move(s));
      } else {
        fail(ErrorCode::data, "unknown split '" + split + "'");
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::data, manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.code(), manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dataset;
}

Dataset load_image_folder(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::io, "not a directory: " + root.string());
  Dataset dataset;
  for (const char* split : {"train", "test"}) {
    const fs::path dir = root / split;
    if (!fs::is_directory(dir)) fail(ErrorCode::data, "missing split directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& class_dir : fs::directory_iterator(dir)) {
      if (!class_dir.is_directory()) continue;
      for (const auto& f : fs::directory_iterator(class_dir.path())) {
        const auto ext = f.path().extension();
        if (ext == ".pgm" || ext == ".ppm") files.push_back(f.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      LabeledSample s;
      const auto label_dir = f.parent_path().filename().string();
      try {
        s.label = std::stoi(label_dir);
      } catch (const std::exception&) {
        fail(ErrorCode::data, "class directory is not an integer label: " + label_dir);
      }
      s.sample_id = fs::relative(f, root).generic_string();
      s.image = read_netpbm(f);
      (std::string(split) == "train" ? dataset.train : dataset.test).push_back(std::move(s));
    }
  }
  return dataset;
}

fs::path export_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  const fs::path manifest = root / "manifest.jsonl";
  std::ofstream out(manifest);
  if (!out) fail(ErrorCode::io, "cannot write manifest " + manifest.string());
  auto emit = [&](const std::vector<LabeledSample>& samples, const char* split) {
    for (const auto& s : samples) {
      const fs::path rel = fs::path(split) / std::to_string(s.label) /
                           (s.sample_id + (s.image.channels == 1 ? ".pgm" : ".ppm"));
      fs::create_directories((root / rel).parent_path());
      write_netpbm(root / rel, s.image);
      json rec{{"path", rel.generic_string()}, {"label", s.label}, {"split", split}, {"id", s.sample_id}};
      out << rec.dump() << '\n';
    }
  };
  emit(dataset.train, "train");
  emit(dataset.test, "test");
  return manifest;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(batch_size))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + static_cast<std::size_t>(batch_size))));
  return out;
}

std::vector<LabeledSample> gather(std::span<const LabeledSample> data, const std::vector<std::size_t>& idx) {
  std::vector<LabeledSample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace fscil
