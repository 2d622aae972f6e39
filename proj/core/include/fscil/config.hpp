#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/augment.hpp"
#include "fscil/losses.hpp"
#include "fscil/nn.hpp"
#include "fscil/protocol.hpp"
#include "fscil/subnet.hpp"
#include "fscil/toy_data.hpp"

namespace fscil {

struct DatasetConfig {
  std::string kind = "toy";  // toy | manifest | folder
  std::string path;          // manifest file or folder root
  ToyDatasetConfig toy;
};

struct StreamConfig {
  int base_classes = 6;
  int ways = 2;
  int shots = 5;
  int sessions = 2;
  bool shuffle_classes = false;
};

struct EncoderConfig {
  std::string architecture = "conv4";
  std::vector<int> channels{8, 16, 32, 64};
  int embedding_dim = 64;
};

struct StageConfig {
  int epochs = 0;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 64;
  LossConfig loss;
};

struct IncrementalConfig {
  int epochs_per_session = 10;
  std::optional<double> lr;  // defaults to base lr * 0.01
  double momentum = 0.9;
  int batch_size = 64;
  std::vector<std::string> frozen_layer_prefixes{"block1", "block2", "block3"};
  LossConfig loss;
};

struct PseudoConfig {
  int multiplier = 2;
  std::vector<std::string> transforms{"rot180"};
};

struct SubnetConfig {
  double retain_fraction = 0.9;
  int steps = 50;
  double score_lr = 0.1;
  std::string mode = "scores";  // scores | magnitude
};

struct TrickToggles {
  bool supcon = false;
  bool etf = false;
  bool pseudo = false;
  bool subnet_tuning = false;
  bool pretraining = false;
  bool rotation = false;

  static TrickToggles all_on() { return {true, true, true, true, true, true}; }
  static TrickToggles all_off() { return {}; }
  // Trick groups used by the ablation grid.
  static TrickToggles groups(bool stability, bool adaptability, bool training) {
    return {stability, stability, stability, adaptability, training, training};
  }
  bool stability() const noexcept { return supcon && etf && pseudo; }
  bool adaptability() const noexcept { return subnet_tuning; }
  bool training() const noexcept { return pretraining && rotation; }
  std::string label() const;

  friend bool operator==(const TrickToggles&, const TrickToggles&) = default;
};

struct ExperimentConfig {
  std::string name = "toy";
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  StreamConfig stream;
  EncoderConfig encoder;
  StageConfig pretrain;
  StageConfig base;
  IncrementalConfig incremental;
  PseudoConfig pseudo;
  double etf_epoch_factor = 0.1;
  SubnetConfig subnet;
  ViewConfig augment;
  TrickToggles tricks;
  std::string geometry_split = "test";  // test | train

  ExperimentConfig();

  double incremental_lr() const;
  // Throws ErrorCode::config on any inconsistent value.
  void validate() const;
  nlohmann::json to_json() const;
  // Strict: unknown keys and type errors raise config errors. `source` is the
  // raw text the json came from and is used for line numbers.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::string& source = {});
  std::string hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
// Parses config text; `origin` names the source in diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& origin = "<config>");

// "a.b.c=value"; value parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

Dataset load_dataset(const DatasetConfig& config);
Architecture build_architecture(const ExperimentConfig& config, const ActivationShape& input);
TuningPolicy tuning_policy(const ExperimentConfig& config);
MaskSearchConfig mask_search_config(const ExperimentConfig& config);
PseudoClassScheme pseudo_scheme(const ExperimentConfig& config);

}  // namespace fscil
