#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fscil/nn.hpp"
#include "fscil/protocol.hpp"

namespace fscil {

struct LayerMask {
  std::string name;  // parameter name
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;  // column-major like the parameter
};

/// Binary mask over every encoder parameter; 1 marks the retained subnetwork.
struct SubnetMask {
  std::vector<LayerMask> entries;
  double retain_fraction = 1.0;

  std::size_t size() const;
  std::size_t count_ones() const;
  bool matches(const ParameterSet& params) const;
  ParameterSet as_parameters() const;

  static SubnetMask full(const ParameterSet& params);
};

/// Keeps the round(fraction * |theta|) largest scores; ties go to the lower
/// flat index.
SubnetMask top_fraction_mask(const ParameterSet& scores, double fraction);

ParameterSet apply_mask(const ParameterSet& params, const SubnetMask& mask);

/// Forward pass with theta * m.
Matrix apply_mask_forward(const Encoder& encoder, const SubnetMask& mask, std::span<const Image> images);

/// Loss on one batch at the given parameters; writes d(loss)/d(params) into
/// `grads` (pre-shaped like params). Randomness must derive from `step_seed`.
using BatchObjective = std::function<double(const ParameterSet& params, std::span<const LabeledSample> batch,
                                            std::uint64_t step_seed, ParameterSet& grads)>;

enum class MaskSearchMode { scores, magnitude };

struct MaskSearchConfig {
  double retain_fraction = 0.9;
  int steps = 50;
  double score_lr = 0.1;
  int batch_size = 64;
  std::uint64_t seed = 0;
  MaskSearchMode mode = MaskSearchMode::scores;

  void validate() const;
};

/// Searches a binary mask whose masked network keeps the base loss of the
/// full network. Scores start at |theta|, are trained with straight-through
/// gradients of the objective and binarized by global top fraction.
SubnetMask extract_subnet_mask(const Encoder& encoder, std::span<const LabeledSample> base_data,
                               const BatchObjective& objective, const MaskSearchConfig& config);

/// Mean masked-minus-full objective over `data`.
double subnet_gap(const Encoder& encoder, const SubnetMask& mask, std::span<const LabeledSample> data,
                  const BatchObjective& objective, int batch_size, std::uint64_t seed);

struct TuningPolicy {
  std::vector<std::string> frozen_layer_prefixes;
  double incremental_lr = 1e-3;
  int epochs_per_session = 10;
  int batch_size = 64;
  double momentum = 0.9;

  // Throws unknown-layer if a prefix matches no layer of `arch`.
  void validate(const Architecture& arch) const;
};

/// 1 where a parameter may change: outside the mask and outside every frozen prefix.
ParameterSet trainable_parameters(const ParameterSet& params, const SubnetMask& mask, const TuningPolicy& policy);

/// Fine-tunes only the trainable complement on one session's data.
void incremental_tune(Encoder& encoder, const SubnetMask& mask, const TuningPolicy& policy,
                      std::span<const LabeledSample> session_data, const BatchObjective& objective,
                      std::uint64_t seed);

void write_mask(const std::filesystem::path& path, const SubnetMask& mask);
SubnetMask read_mask(const std::filesystem::path& path);

}  // namespace fscil
