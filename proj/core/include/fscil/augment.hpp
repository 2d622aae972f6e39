#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fscil/image.hpp"
#include "fscil/rng.hpp"

namespace fscil {

// Rotates counterclockwise by `quarter_turns` * 90 degrees. Non-square images
// only accept multiples of 180 degrees.
Image rotate90(const Image& image, int quarter_turns);
Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);

enum class HardTransform { rot90, rot180, rot270, hflip, vflip, invert };

HardTransform parse_hard_transform(const std::string& name);
std::string to_string(HardTransform t);
Image apply_hard_transform(const Image& image, HardTransform t);

/// Label-space expansion by deterministic semantics-shifting transforms.
/// Transform index 0 is the identity; index m >= 1 applies transforms[m-1].
struct PseudoClassScheme {
  int multiplier = 2;
  int base_classes = 0;
  std::vector<HardTransform> transforms;

  // First M-1 of {rot180, rot90, rot270, vflip, hflip, invert}.
  static PseudoClassScheme make_default(int multiplier, int base_classes);

  int label_space() const noexcept { return base_classes * multiplier; }
  void validate() const;
};

// class_id + base_classes * m; a bijection onto [0, base_classes * M).
int pseudo_label(const PseudoClassScheme& scheme, int class_id, int transform_index);
Image apply_pseudo_transform(const PseudoClassScheme& scheme, const Image& image, int transform_index);

struct RotationExample {
  Image image;
  int label = 0;  // quarter turns
};

RotationExample make_rotation_example(const Image& image, int rotation_index);
RotationExample make_rotation_example(const Image& image, Rng& rng);

struct ViewConfig {
  bool enabled = true;
  double crop_scale_min = 0.7;  // minimum crop area fraction
  bool hflip = true;
  double brightness = 0.15;
  double contrast = 0.2;

  static ViewConfig identity() { return ViewConfig{false, 1.0, false, 0.0, 0.0}; }
};

// One view's random parameters. Drawn in this order: crop scale, crop top,
// crop left, flip coin, brightness shift, contrast factor.
struct ViewParams {
  int top = 0;
  int left = 0;
  int crop_height = 0;
  int crop_width = 0;
  bool flip = false;
  double brightness = 0.0;
  double contrast = 1.0;

  friend bool operator==(const ViewParams&, const ViewParams&) = default;
};

ViewParams sample_view_params(Rng& rng, int height, int width, const ViewConfig& config);
Image apply_view(const Image& image, const ViewParams& params);
Image augment_view(const Image& image, Rng& rng, const ViewConfig& config);

/// Two independent light augmentations drawn from a generator seeded by `seed`.
std::pair<Image, Image> make_contrastive_views(const Image& image, std::uint64_t seed, const ViewConfig& config);

}  // namespace fscil
