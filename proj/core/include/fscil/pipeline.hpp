#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fscil/config.hpp"
#include "fscil/geometry.hpp"
#include "fscil/metrics.hpp"
#include "fscil/nn.hpp"
#include "fscil/protocol.hpp"
#include "fscil/records.hpp"
#include "fscil/subnet.hpp"

namespace fscil {

enum class Stage { pretrain, base, incremental };

const char* to_string(Stage stage) noexcept;
Stage parse_stage(const std::string& name);

struct TrainingLog {
  std::vector<double> epoch_loss;
  std::optional<int> etf_assignment_epoch;
  std::vector<std::string> events;
};

// Receives human-readable progress lines.
using LogSink = std::function<void(const std::string&)>;

struct RunState {
  Stage stage = Stage::pretrain;
  int session_index = -1;  // last completed session
  Encoder encoder;
  PrototypeClassifier classifier;
  std::optional<SubnetMask> mask;
  std::vector<SessionRecord> results;
  std::vector<int> base_class_ids;
  TrainingLog pretrain_log;
  TrainingLog base_log;
};

StreamParams stream_params(const ExperimentConfig& config);
Encoder make_encoder(const ExperimentConfig& config, const TaskStream& stream);

/// Contrastive pretraining on two views of every base-session image; labels
/// are ignored. Returns the encoder unchanged when the pretraining toggle is off.
Encoder run_pretraining(const ExperimentConfig& config, const TaskStream& stream, Encoder encoder,
                        TrainingLog* log = nullptr, const LogSink& sink = {});

/// Heads and ETF state that make up the base-session training objective.
struct BaseObjectiveState {
  LinearHead class_head;     // over the (pseudo-expanded) label space
  LinearHead rotation_head;  // d -> 4
  std::optional<EtfFrame> frame;
  EtfAssignment assignment;
  std::vector<int> base_class_ids;
};

struct BaseStepResult {
  double loss = 0.0;
  ParameterSet class_head_grads;
  ParameterSet rotation_head_grads;
};

// Loss weights actually used on the base session for the enabled tricks.
LossConfig effective_base_loss(const ExperimentConfig& config, bool etf_active);

/// One base-session step: builds the augmented (pseudo-expanded) batch from
/// `step_seed`, evaluates the composite loss and fills encoder gradients.
BaseStepResult base_step(const ExperimentConfig& config, const BaseObjectiveState& state, const Architecture& arch,
                         const ParameterSet& params, std::span<const LabeledSample> batch, std::uint64_t step_seed,
                         ParameterSet& grads);

// The base objective with the heads held fixed, for mask search.
BatchObjective base_objective(const ExperimentConfig& config, const BaseObjectiveState& state, const Architecture& arch);

// Loss weights used while tuning on an incremental session.
LossConfig effective_incremental_loss(const ExperimentConfig& config);

struct BaseSessionOutcome {
  Encoder encoder;
  PrototypeClassifier classifier;
  std::vector<Prototype> prototypes;  // normalized, real base classes
  BaseObjectiveState objective;
  TrainingLog log;
  int training_label_space = 0;
};

BaseSessionOutcome run_base_session(const ExperimentConfig& config, const TaskStream& stream, Encoder encoder,
                                    const LogSink& sink = {});

/// Base prototypes, mask extraction and session-0 evaluation after pretraining
/// and base training.
RunState start_run(const ExperimentConfig& config, const TaskStream& stream, const LogSink& sink = {});

/// Adds session `state.session_index + 1`.
RunState run_incremental_session(const ExperimentConfig& config, RunState state, const TaskStream& stream,
                                 const LogSink& sink = {});

SessionRecord evaluate_state(const ExperimentConfig& config, const RunState& state, const TaskStream& stream,
                             int session_index);

struct RunOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  // Stop once this session completes; -1 runs to the end.
  int stop_after_session = -1;
  LogSink sink;
};

RunState run_pipeline(const ExperimentConfig& config, const TaskStream& stream, const RunOptions& options = {});

/// Continues from the newest checkpoint in `options.checkpoint_dir`.
RunState resume_pipeline(const ExperimentConfig& config, const TaskStream& stream, const RunOptions& options);

// Checkpoint layout: <dir>/session_<t>/{encoder.bin, classifier.bin, mask.json, state.json}
void write_checkpoint(const std::filesystem::path& dir, const ExperimentConfig& config, const RunState& state);
RunState read_checkpoint(const std::filesystem::path& session_dir, const ExperimentConfig& config);
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir);

struct AblationCell {
  TrickToggles toggles;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_accuracy;  // per seed
  std::vector<double> final_base_accuracy;
  std::vector<double> final_novel_accuracy;

  double mean_final_accuracy() const;
};

/// The eight stability x adaptability x training combinations, all-off first.
std::vector<TrickToggles> ablation_grid_toggles();

/// One full run per (subset, seed); all cells share data and seeds.
std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& config, const Dataset& dataset,
                                            std::span<const TrickToggles> subsets,
                                            std::span<const std::uint64_t> seeds, const LogSink& sink = {});

}  // namespace fscil
