#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "fixtures.hpp"
#include "fscil/error.hpp"
#include "fscil/subnet.hpp"

using namespace fscil;

namespace {

std::vector<LabeledSample> samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    Image img(3, 3, 1);
    for (auto& p : img.pixels) p = u(rng);
    out.push_back({img, i % 3, "s" + std::to_string(i)});
  }
  return out;
}

// Squared distance from each embedding to the one-hot vector of its label.
BatchObjective regression_objective(const Architecture& arch) {
  return [arch](const ParameterSet& params, std::span<const LabeledSample> batch, std::uint64_t,
                ParameterSet& grads) {
    std::vector<Image> images;
    for (const auto& s : batch) images.push_back(s.image);
    ForwardCache cache;
    const Tensor y = forward(arch, params, pack_images(images, arch.input), static_cast<int>(batch.size()), &cache);
    Tensor diff = y;
    for (std::size_t i = 0; i < batch.size(); ++i) diff(batch[i].label, static_cast<Eigen::Index>(i)) -= 1.0f;
    const double n = static_cast<double>(batch.size());
    grads = backward(arch, params, cache, diff * static_cast<float>(2.0 / n));
    return diff.squaredNorm() / n;
  };
}

Encoder small_encoder() {
  const Architecture a = Architecture::mlp({1, 3, 3}, {8, 8}, 3, true);
  return {a, init_parameters(a, 5)};
}

}  // namespace

TEST_CASE("top fraction keeps round(f*N) entries, ties to the lower index") {
  ParameterSet s;
  s.entries.push_back({"a.weight", Tensor::Constant(2, 3, 1.0f)});
  s.entries.push_back({"b.weight", Tensor::Constant(1, 4, 1.0f)});
  const SubnetMask m = top_fraction_mask(s, 0.5);
  CHECK(m.size() == 10u);
  CHECK(m.count_ones() == 5u);
  for (int i = 0; i < 5; ++i) CHECK(m.entries[0].bits[static_cast<std::size_t>(i)] == 1);
  CHECK(m.entries[0].bits[5] == 0);
  CHECK(top_fraction_mask(s, 1.0).count_ones() == 10u);
  CHECK_THROWS_AS(top_fraction_mask(s, 0.0), Error);
  CHECK_THROWS_AS(top_fraction_mask(s, 1.5), Error);
}

TEST_CASE("masking zeroes exactly the dropped weights") {
  const Encoder e = small_encoder();
  const SubnetMask m = top_fraction_mask(e.params, 0.7);
  const ParameterSet masked = apply_mask(e.params, m);
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    for (std::size_t k = 0; k < m.entries[i].bits.size(); ++k)
      CHECK(masked.entries[i].value.data()[k] ==
            (m.entries[i].bits[k] ? e.params.entries[i].value.data()[k] : 0.0f));
}

TEST_CASE("retain fraction 1.0 gives a zero gap") {
  const Encoder e = small_encoder();
  const auto data = samples(30, 1);
  MaskSearchConfig cfg;
  cfg.retain_fraction = 1.0;
  cfg.steps = 5;
  cfg.batch_size = 8;
  const SubnetMask m = extract_subnet_mask(e, data, regression_objective(e.arch), cfg);
  CHECK(m.count_ones() == m.size());
  CHECK(subnet_gap(e, m, data, regression_objective(e.arch), 8, 3) == 0.0);
}

TEST_CASE("mask search is deterministic and keeps the requested fraction") {
  const Encoder e = small_encoder();
  const auto data = samples(40, 2);
  MaskSearchConfig cfg;
  cfg.retain_fraction = 0.6;
  cfg.steps = 20;
  cfg.batch_size = 10;
  cfg.seed = 4;
  const SubnetMask a = extract_subnet_mask(e, data, regression_objective(e.arch), cfg);
  const SubnetMask b = extract_subnet_mask(e, data, regression_objective(e.arch), cfg);
  CHECK(a.count_ones() == static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(a.size()))));
  for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].bits == b.entries[i].bits);

  // Trained scores should not do worse than plain magnitude pruning here.
  MaskSearchConfig mag = cfg;
  mag.mode = MaskSearchMode::magnitude;
  const SubnetMask by_magnitude = extract_subnet_mask(e, data, regression_objective(e.arch), mag);
  ParameterSet absolute = e.params;
  for (auto& t : absolute.entries) t.value = t.value.cwiseAbs();
  const SubnetMask expected = top_fraction_mask(absolute, 0.6);
  for (std::size_t i = 0; i < expected.entries.size(); ++i) CHECK(by_magnitude.entries[i].bits == expected.entries[i].bits);
  CHECK(subnet_gap(e, a, data, regression_objective(e.arch), 10, 0) <=
        subnet_gap(e, by_magnitude, data, regression_objective(e.arch), 10, 0) + 1e-9);
}

TEST_CASE("incremental tuning leaves masked and frozen parameters bit-identical") {
  Encoder e = small_encoder();
  const ParameterSet before = e.params;
  const SubnetMask mask = top_fraction_mask(e.params, 0.5);
  TuningPolicy policy;
  policy.frozen_layer_prefixes = {"fc1"};
  policy.incremental_lr = 0.05;
  policy.epochs_per_session = 3;
  policy.batch_size = 4;
  const auto data = samples(10, 3);
  incremental_tune(e, mask, policy, data, regression_objective(e.arch), 8);
  const ParameterSet trainable = trainable_parameters(before, mask, policy);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < before.entries.size(); ++i) {
    const bool frozen_layer = before.entries[i].name.rfind("fc1", 0) == 0;
    for (Eigen::Index k = 0; k < before.entries[i].value.size(); ++k) {
      const float was = before.entries[i].value.data()[k], now = e.params.entries[i].value.data()[k];
      const bool in_mask = mask.entries[i].bits[static_cast<std::size_t>(k)] != 0;
      if (in_mask || frozen_layer) {
        CHECK(std::memcmp(&was, &now, sizeof(float)) == 0);
        CHECK(trainable.entries[i].value.data()[k] == 0.0f);
      } else {
        changed += was != now;
      }
    }
  }
  CHECK(changed > 0);
}

TEST_CASE("tuning policy rejects unknown layers") {
  const Encoder e = small_encoder();
  TuningPolicy p;
  p.frozen_layer_prefixes = {"block9"};
  try {
    p.validate(e.arch);
    FAIL("expected throw");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::unknown_layer);
  }
}

TEST_CASE("mask files round-trip") {
  fixture::TempDir dir("mask");
  const Encoder e = small_encoder();
  const SubnetMask m = top_fraction_mask(e.params, 0.37);
  write_mask(dir.path() / "m.json", m);
  const SubnetMask back = read_mask(dir.path() / "m.json");
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].name == m.entries[i].name);
    CHECK(back.entries[i].bits == m.entries[i].bits);
  }
  CHECK(back.retain_fraction == m.retain_fraction);
  CHECK(back.matches(e.params));
}
