#include "fscil/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

struct Stroke {
  enum class Kind { segment, ring } kind = Kind::segment;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // ring: (x0, y0) center, x1 radius
  double thickness = 1.0;
};

double segment_distance(double px, double py, const Stroke& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

double stroke_distance(double px, double py, const Stroke& s) {
  if (s.kind == Stroke::Kind::segment) return segment_distance(px, py, s);
  return std::abs(std::hypot(px - s.x0, py - s.y0) - s.x1);
}

Stroke random_stroke(Rng& rng, int size) {
  std::uniform_real_distribution<double> coord(2.0, size - 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Stroke s;
  if (unit(rng) < 0.25) {
    s.kind = Stroke::Kind::ring;
    s.x0 = coord(rng);
    s.y0 = coord(rng);
    s.x1 = 1.5 + unit(rng) * size / 6.0;
    s.thickness = 0.8;
  } else {
    s.x0 = coord(rng);
    s.y0 = coord(rng);
    do {
      s.x1 = coord(rng);
      s.y1 = coord(rng);
    } while (std::hypot(s.x1 - s.x0, s.y1 - s.y0) < size / 4.0);
    s.thickness = 0.7 + 0.5 * unit(rng);
  }
  return s;
}

Image render(const std::vector<Stroke>& strokes, const std::vector<double>& intensity, int size, double dx,
             double dy) {
  Image img(size, size, 1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.0;
      for (std::size_t k = 0; k < strokes.size(); ++k) {
        const double d = stroke_distance(x + 0.5 - dx, y + 0.5 - dy, strokes[k]);
        const double cover = std::clamp(strokes[k].thickness + 0.5 - d, 0.0, 1.0);
        v = std::max(v, cover * intensity[k]);
      }
      img.at(y, x) = static_cast<float>(v);
    }
  }
  return img;
}

}  // namespace

Dataset make_toy_dataset(const ToyDatasetConfig& config) {
  if (config.classes <= 0 || config.train_per_class < 0 || config.test_per_class < 0 || config.image_size < 8 ||
      config.strokes_per_class <= 0)
    fail(ErrorCode::invalid_argument, "invalid toy dataset configuration");

  const int size = config.image_size;
  Dataset dataset;
  for (int c = 0; c < config.classes; ++c) {
    Rng class_rng(derive_seed(config.seed, "toy-class", static_cast<std::uint64_t>(c)));
    std::vector<Stroke> templ;
    for (int k = 0; k < config.strokes_per_class; ++k) templ.push_back(random_stroke(class_rng, size));

    for (int split = 0; split < 2; ++split) {
      const int count = split == 0 ? config.train_per_class : config.test_per_class;
      Rng rng(derive_seed(config.seed, split == 0 ? "toy-train" : "toy-test", static_cast<std::uint64_t>(c)));
      std::uniform_real_distribution<double> sym(-1.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, config.noise);
      for (int i = 0; i < count; ++i) {
        std::vector<Stroke> strokes = templ;
        for (auto& s : strokes) {
          s.x0 += config.wobble * sym(rng);
          s.y0 += config.wobble * sym(rng);
          if (s.kind == Stroke::Kind::segment) {
            s.x1 += config.wobble * sym(rng);
            s.y1 += config.wobble * sym(rng);
          }
        }
        if (unit(rng) < config.clutter) strokes.push_back(random_stroke(rng, size));
        std::vector<double> intensity(strokes.size());
        for (auto& v : intensity) v = 0.6 + 0.4 * unit(rng);
        const double dx = config.shift * sym(rng), dy = config.shift * sym(rng);
        Image img = render(strokes, intensity, size, dx, dy);
        const double background = 0.15 * unit(rng);
        for (auto& p : img.pixels)
          p = static_cast<float>(std::clamp(p + background + gauss(rng), 0.0, 1.0));

        char id[48];
        std::snprintf(id, sizeof id, "c%03d-%s-%04d", c, split == 0 ? "train" : "test", i);
        LabeledSample sample{std::move(img), c, id};
        (split == 0 ? dataset.train : dataset.test).push_back(std::move(sample));
      }
    }
  }
  return dataset;
}

}  // namespace fscil
