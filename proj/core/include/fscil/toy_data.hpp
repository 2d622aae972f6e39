#pragma once

#include <cstdint>

#include "fscil/protocol.hpp"

namespace fscil {

// Deterministic synthetic image dataset. Each class is a fixed composition of
// strokes and rings; samples add translation jitter, stroke wobble, contrast
// variation and pixel noise.
struct ToyDatasetConfig {
  int classes = 10;
  int train_per_class = 50;
  int test_per_class = 50;
  int image_size = 16;
  int strokes_per_class = 3;
  double shift = 1.5;        // max global translation, pixels
  double wobble = 0.75;      // max per-stroke endpoint displacement, pixels
  double noise = 0.15;       // gaussian pixel noise sigma
  double clutter = 0.5;      // probability of one random distractor stroke
  std::uint64_t seed = 7;
};

Dataset make_toy_dataset(const ToyDatasetConfig& config);

}  // namespace fscil
