#include <doctest.h>

#include <set>

#include "fscil/augment.hpp"
#include "fscil/error.hpp"

using namespace fscil;

namespace {

Image ramp(int h, int w, int c = 1) {
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i) / 100.0f;
  return img;
}

}  // namespace

TEST_CASE("rotate90 turns counterclockwise and composes") {
  Image img(2, 2, 1);
  img.pixels = {1, 2, 3, 4};  // [[1,2],[3,4]]
  CHECK(rotate90(img, 1).pixels == std::vector<float>{2, 4, 1, 3});
  CHECK(rotate90(img, 2).pixels == std::vector<float>{4, 3, 2, 1});
  CHECK(rotate90(img, 3).pixels == std::vector<float>{3, 1, 4, 2});
  const Image r = ramp(5, 5, 3);
  CHECK(rotate90(rotate90(r, 1), 3) == r);
  CHECK(rotate90(r, 4) == r);
  CHECK(rotate90(rotate90(r, 1), 1) == rotate90(r, 2));
}

TEST_CASE("non-square images only rotate by half turns") {
  const Image r = ramp(3, 4);
  CHECK_NOTHROW(rotate90(r, 2));
  CHECK_THROWS_AS(rotate90(r, 1), Error);
  CHECK_THROWS_AS(make_rotation_example(r, 1), Error);
}

TEST_CASE("flips are involutions") {
  const Image r = ramp(4, 6, 3);
  CHECK(flip_horizontal(flip_horizontal(r)) == r);
  CHECK(flip_vertical(flip_vertical(r)) == r);
  CHECK(flip_horizontal(flip_vertical(r)) == rotate90(r, 2));
  CHECK(flip_horizontal(r).at(0, 0, 1) == r.at(0, 5, 1));
}

TEST_CASE("pseudo labels form a bijection onto C*M") {
  for (int m_count : {1, 2, 4, 7}) {
    const auto scheme = PseudoClassScheme::make_default(m_count, 6);
    CHECK(scheme.label_space() == 6 * m_count);
    std::set<int> seen;
    for (int c = 0; c < 6; ++c)
      for (int m = 0; m < m_count; ++m) {
        const int y = pseudo_label(scheme, c, m);
        CHECK(y == c + 6 * m);
        CHECK(seen.insert(y).second);
      }
    CHECK(static_cast<int>(seen.size()) == scheme.label_space());
  }
  const auto s2 = PseudoClassScheme::make_default(2, 6);
  REQUIRE(s2.transforms.size() == 1u);
  CHECK(s2.transforms[0] == HardTransform::rot180);
  CHECK_THROWS_AS(pseudo_label(s2, 6, 0), Error);
  CHECK_THROWS_AS(pseudo_label(s2, 0, 2), Error);
}

TEST_CASE("pseudo transforms apply deterministically") {
  const auto s = PseudoClassScheme::make_default(3, 2);
  const Image r = ramp(4, 4);
  CHECK(apply_pseudo_transform(s, r, 0) == r);
  CHECK(apply_pseudo_transform(s, r, 1) == rotate90(r, 2));
  CHECK(apply_pseudo_transform(s, r, 2) == rotate90(r, 1));
  CHECK(parse_hard_transform(to_string(HardTransform::invert)) == HardTransform::invert);
  CHECK_THROWS_AS(parse_hard_transform("shear"), Error);
}

TEST_CASE("rotation examples cover the four labels") {
  const Image r = ramp(4, 4);
  Rng rng(3);
  std::set<int> labels;
  for (int i = 0; i < 64; ++i) {
    const RotationExample ex = make_rotation_example(r, rng);
    CHECK(ex.image == rotate90(r, ex.label));
    labels.insert(ex.label);
  }
  CHECK(labels == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("views are seeded, bounded and shape preserving") {
  const Image r = ramp(8, 8, 3);
  const ViewConfig cfg;
  const auto [a1, b1] = make_contrastive_views(r, 42, cfg);
  const auto [a2, b2] = make_contrastive_views(r, 42, cfg);
  CHECK(a1 == a2);
  CHECK(b1 == b2);
  CHECK_FALSE(a1 == b1);
  CHECK(a1.height == 8);
  CHECK(a1.channels == 3);
  for (float v : a1.pixels) CHECK((v >= 0.0f && v <= 1.0f));
  Rng rng(1);
  CHECK(augment_view(r, rng, ViewConfig::identity()) == r);
}

TEST_CASE("view parameters respect the crop bounds") {
  Rng rng(7);
  ViewConfig cfg;
  cfg.crop_scale_min = 0.5;
  for (int i = 0; i < 200; ++i) {
    const ViewParams p = sample_view_params(rng, 16, 12, cfg);
    CHECK(p.crop_height >= 1);
    CHECK(p.top + p.crop_height <= 16);
    CHECK(p.left + p.crop_width <= 12);
    CHECK(p.crop_height * p.crop_width >= 0.4 * 16 * 12);
  }
}
