#include "fscil/augment.hpp"

#include <algorithm>
#include <cmath>

#include "fscil/error.hpp"

namespace fscil {

Image rotate90(const Image& image, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return image;
  const int h = image.height, w = image.width;
  if (k == 2) {
    Image out(h, w, image.channels);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(h - 1 - y, w - 1 - x, c);
    return out;
  }
  if (!image.is_square()) fail(ErrorCode::shape_mismatch, "quarter-turn rotation needs a square image");
  const int n = h;
  Image out(n, n, image.channels);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < image.channels; ++c)
        out.at(y, x, c) = k == 1 ? image.at(x, n - 1 - y, c) : image.at(n - 1 - x, y, c);
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

Image flip_vertical(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(image.height - 1 - y, x, c);
  return out;
}

HardTransform parse_hard_transform(const std::string& name) {
  if (name == "rot90") return HardTransform::rot90;
  if (name == "rot180") return HardTransform::rot180;
  if (name == "rot270") return HardTransform::rot270;
  if (name == "hflip") return HardTransform::hflip;
  if (name == "vflip") return HardTransform::vflip;
  if (name == "invert") return HardTransform::invert;
  fail(ErrorCode::config, "unknown hard transform '" + name + "'");
}

std::string to_string(HardTransform t) {
  switch (t) {
    case HardTransform::rot90: return "rot90";
    case HardTransform::rot180: return "rot180";
    case HardTransform::rot270: return "rot270";
    case HardTransform::hflip: return "hflip";
    case HardTransform::vflip: return "vflip";
    case HardTransform::invert: return "invert";
  }
  return "?";
}

Image apply_hard_transform(const Image& image, HardTransform t) {
  switch (t) {
    case HardTransform::rot90: return rotate90(image, 1);
    case HardTransform::rot180: return rotate90(image, 2);
    case HardTransform::rot270: return rotate90(image, 3);
    case HardTransform::hflip: return flip_horizontal(image);
    case HardTransform::vflip: return flip_vertical(image);
    case HardTransform::invert: {
      Image out = image;
      for (auto& p : out.pixels) p = 1.0f - p;
      return out;
    }
  }
  return image;
}

PseudoClassScheme PseudoClassScheme::make_default(int multiplier, int base_classes) {
  static const HardTransform order[] = {HardTransform::rot180, HardTransform::rot90, HardTransform::rot270,
                                        HardTransform::vflip,  HardTransform::hflip, HardTransform::invert};
  if (multiplier < 1 || multiplier > 7)
    fail(ErrorCode::config, "default pseudo-class schemes support multipliers 1..7");
  PseudoClassScheme s;
  s.multiplier = multiplier;
  s.base_classes = base_classes;
  s.transforms.assign(std::begin(order), std::begin(order) + (multiplier - 1));
  return s;
}

void PseudoClassScheme::validate() const {
  if (multiplier < 1) fail(ErrorCode::config, "pseudo-class multiplier must be >= 1");
  if (static_cast<int>(transforms.size()) != multiplier - 1)
    fail(ErrorCode::config, "pseudo-class scheme needs exactly M-1 transforms");
  if (base_classes < 0) fail(ErrorCode::config, "negative base class count");
}

int pseudo_label(const PseudoClassScheme& scheme, int class_id, int transform_index) {
  if (class_id < 0 || class_id >= scheme.base_classes)
    fail(ErrorCode::out_of_range, "class " + std::to_string(class_id) + " outside base classes");
  if (transform_index < 0 || transform_index >= scheme.multiplier)
    fail(ErrorCode::out_of_range, "transform index " + std::to_string(transform_index) + " outside [0, M)");
  return scheme.base_classes * transform_index + class_id;
}

Image apply_pseudo_transform(const PseudoClassScheme& scheme, const Image& image, int transform_index) {
  if (transform_index < 0 || transform_index >= scheme.multiplier)
    fail(ErrorCode::out_of_range, "transform index " + std::to_string(transform_index) + " outside [0, M)");
  if (transform_index == 0) return image;
  return apply_hard_transform(image, scheme.transforms[static_cast<std::size_t>(transform_index - 1)]);
}

RotationExample make_rotation_example(const Image& image, int rotation_index) {
  if (!image.is_square()) fail(ErrorCode::shape_mismatch, "rotation pretext needs square images");
  if (rotation_index < 0 || rotation_index > 3)
    fail(ErrorCode::out_of_range, "rotation index must be in {0,1,2,3}");
  return {rotate90(image, rotation_index), rotation_index};
}

RotationExample make_rotation_example(const Image& image, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  return make_rotation_example(image, pick(rng));
}

ViewParams sample_view_params(Rng& rng, int height, int width, const ViewConfig& config) {
  ViewParams p;
  p.crop_height = height;
  p.crop_width = width;
  if (!config.enabled) return p;
  std::uniform_real_distribution<double> scale_dist(std::min(config.crop_scale_min, 1.0), 1.0);
  const double side = std::sqrt(scale_dist(rng));
  p.crop_height = std::clamp(static_cast<int>(std::lround(side * height)), 1, height);
  p.crop_width = std::clamp(static_cast<int>(std::lround(side * width)), 1, width);
  p.top = std::uniform_int_distribution<int>(0, height - p.crop_height)(rng);
  p.left = std::uniform_int_distribution<int>(0, width - p.crop_width)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool coin = unit(rng) < 0.5;
  p.flip = config.hflip && coin;
  p.brightness = std::uniform_real_distribution<double>(-config.brightness, config.brightness)(rng);
  p.contrast = std::uniform_real_distribution<double>(1.0 - config.contrast, 1.0 + config.contrast)(rng);
  return p;
}

Image apply_view(const Image& image, const ViewParams& p) {
  const int h = image.height, w = image.width, ch = image.channels;
  if (p.crop_height < 1 || p.crop_width < 1 || p.top < 0 || p.left < 0 || p.top + p.crop_height > h ||
      p.left + p.crop_width > w)
    fail(ErrorCode::invalid_argument, "crop window outside image");
  Image out(h, w, ch);
  const double sy = static_cast<double>(p.crop_height) / h;
  const double sx = static_cast<double>(p.crop_width) / w;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp(p.top + (y + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ay = fy - y0;
    for (int x = 0; x < w; ++x) {
      const int xs = p.flip ? w - 1 - x : x;
      const double fx = std::clamp(p.left + (xs + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double ax = fx - x0;
      for (int c = 0; c < ch; ++c) {
        const double v = (1 - ay) * ((1 - ax) * image.at(y0, x0, c) + ax * image.at(y0, x1, c)) +
                         ay * ((1 - ax) * image.at(y1, x0, c) + ax * image.at(y1, x1, c));
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  if (p.brightness != 0.0 || p.contrast != 1.0) {
    double mean = 0.0;
    for (float v : out.pixels) mean += v;
    mean /= static_cast<double>(out.pixels.size());
    for (auto& v : out.pixels)
      v = static_cast<float>(std::clamp((v - mean) * p.contrast + mean + p.brightness, 0.0, 1.0));
  }
  return out;
}

Image augment_view(const Image& image, Rng& rng, const ViewConfig& config) {
  if (!config.enabled) return image;
  return apply_view(image, sample_view_params(rng, image.height, image.width, config));
}

std::pair<Image, Image> make_contrastive_views(const Image& image, std::uint64_t seed, const ViewConfig& config) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "empty image");
  Rng rng(seed);
  Image a = augment_view(image, rng, config);
  Image b = augment_view(image, rng, config);
  return {std::move(a), std::move(b)};
}

}  // namespace fscil
