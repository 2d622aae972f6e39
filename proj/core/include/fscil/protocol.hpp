#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fscil/image.hpp"
#include "fscil/rng.hpp"

namespace fscil {

struct LabeledSample {
  Image image;
  int label = 0;
  std::string sample_id;
};

// A labeled sample collection with its original train/test partition.
struct Dataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;

  // Sorted distinct labels across both splits.
  std::vector<int> class_ids() const;
};

struct SessionSpec {
  int index = 0;
  std::vector<int> class_ids;
  // Empty for the base session, which keeps every available sample.
  std::optional<int> shots_per_class;

  int ways() const noexcept { return static_cast<int>(class_ids.size()); }
};

struct TaskStream {
  std::vector<SessionSpec> sessions;
  std::vector<std::vector<LabeledSample>> train_sets;
  // test_sets[t] is cumulative over sessions 0..t.
  std::vector<std::vector<LabeledSample>> test_sets;

  int session_count() const noexcept { return static_cast<int>(sessions.size()); }
  std::vector<int> seen_classes(int t) const;
  const std::vector<int>& base_classes() const { return sessions.front().class_ids; }
};

struct StreamParams {
  int base_classes = 60;
  int ways = 5;
  int shots = 5;
  int sessions = 8;  // incremental sessions after the base session
  std::uint64_t seed = 0;
  bool shuffle_classes = false;
};

TaskStream build_task_stream(const Dataset& dataset, const StreamParams& params);

const std::vector<LabeledSample>& cumulative_test_set(const TaskStream& stream, int t);

// Throws if any TaskStream invariant is violated.
void validate_stream(const TaskStream& stream);

// The realized split: which sample ids landed in which session.
struct RealizedSplit {
  struct Session {
    int index = 0;
    std::vector<int> class_ids;
    std::optional<int> shots;
    std::vector<std::string> train_ids;
  };
  std::vector<Session> sessions;
};

RealizedSplit realized_split(const TaskStream& stream);
void write_split(const std::filesystem::path& path, const RealizedSplit& split);
RealizedSplit read_split(const std::filesystem::path& path);
// Rebuilds exactly the stream recorded in `split` from the same dataset.
TaskStream stream_from_split(const Dataset& dataset, const RealizedSplit& split);

// Line-delimited JSON manifest: {"path": ..., "label": ..., "split": "train"|"test"}.
// Relative paths resolve against the manifest's directory.
Dataset load_manifest(const std::filesystem::path& manifest);
// root/{train,test}/<integer label>/<image>.pgm|.ppm
Dataset load_image_folder(const std::filesystem::path& root);
// Writes every image as netpbm under `root` plus root/manifest.jsonl.
std::filesystem::path export_dataset(const Dataset& dataset, const std::filesystem::path& root);

// Shuffled index batches covering [0, n) once.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, Rng& rng);
std::vector<LabeledSample> gather(std::span<const LabeledSample> data, const std::vector<std::size_t>& idx);

}  // namespace fscil
