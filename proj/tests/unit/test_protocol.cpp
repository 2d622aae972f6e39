#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "fscil/error.hpp"
#include "fscil/image.hpp"
#include "fscil/protocol.hpp"
#include "fscil/toy_data.hpp"

using namespace fscil;

namespace {

Dataset labeled_dataset(int classes, int train_per_class, int test_per_class) {
  Dataset d;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < train_per_class; ++i) {
      Image img(2, 2, 1, static_cast<float>(c));
      d.train.push_back({img, c, "c" + std::to_string(c) + "-tr-" + std::to_string(i)});
    }
    for (int i = 0; i < test_per_class; ++i) {
      Image img(2, 2, 1, static_cast<float>(c));
      d.test.push_back({img, c, "c" + std::to_string(c) + "-te-" + std::to_string(i)});
    }
  }
  return d;
}

void check_stream(const TaskStream& s, const StreamParams& p) {
  REQUIRE(s.session_count() == p.sessions + 1);
  std::set<int> seen;
  for (int t = 0; t < s.session_count(); ++t) {
    const auto& spec = s.sessions[static_cast<std::size_t>(t)];
    if (t == 0) {
      CHECK(spec.ways() == p.base_classes);
      CHECK_FALSE(spec.shots_per_class.has_value());
    } else {
      CHECK(spec.ways() == p.ways);
      std::map<int, int> counts;
      for (const auto& x : s.train_sets[static_cast<std::size_t>(t)]) ++counts[x.label];
      CHECK(counts.size() == static_cast<std::size_t>(p.ways));
      for (const auto& [c, n] : counts) CHECK(n == p.shots);
    }
    for (int c : spec.class_ids) CHECK(seen.insert(c).second);
    if (t > 0) CHECK(s.test_sets[static_cast<std::size_t>(t)].size() >= s.test_sets[static_cast<std::size_t>(t - 1)].size());
    for (const auto& x : s.test_sets[static_cast<std::size_t>(t)]) CHECK(seen.count(x.label));
  }
}

}  // namespace

TEST_CASE("task stream: base plus N-way K-shot sessions") {
  const Dataset d = labeled_dataset(10, 8, 3);
  const StreamParams p{6, 2, 5, 2, 11, false};
  const TaskStream s = build_task_stream(d, p);
  check_stream(s, p);
  CHECK(s.base_classes() == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(s.train_sets[0].size() == 6u * 8u);
  CHECK(s.test_sets[2].size() == 30u);
  CHECK(s.seen_classes(1) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK_NOTHROW(validate_stream(s));
}

TEST_CASE("task stream: same seed same shots, different seed may differ") {
  const Dataset d = labeled_dataset(10, 20, 2);
  const StreamParams p{6, 2, 5, 2, 3, false};
  const TaskStream a = build_task_stream(d, p), b = build_task_stream(d, p);
  for (int t = 0; t < a.session_count(); ++t)
    for (std::size_t i = 0; i < a.train_sets[static_cast<std::size_t>(t)].size(); ++i)
      CHECK(a.train_sets[static_cast<std::size_t>(t)][i].sample_id == b.train_sets[static_cast<std::size_t>(t)][i].sample_id);
  StreamParams q = p;
  q.seed = 4;
  const TaskStream c = build_task_stream(d, q);
  bool differ = false;
  for (std::size_t i = 0; i < a.train_sets[1].size(); ++i)
    differ |= a.train_sets[1][i].sample_id != c.train_sets[1][i].sample_id;
  CHECK(differ);
}

TEST_CASE("task stream: errors") {
  const Dataset d = labeled_dataset(10, 4, 1);
  SUBCASE("too few classes") {
    try {
      build_task_stream(d, {6, 3, 2, 2, 0, false});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::insufficient_classes);
    }
  }
  SUBCASE("too few shots") {
    try {
      build_task_stream(d, {6, 2, 5, 2, 0, false});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::insufficient_shots);
    }
  }
}

TEST_CASE("task stream: property over random parameters") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int base = 1 + static_cast<int>(rng() % 5), ways = 1 + static_cast<int>(rng() % 3);
    const int sessions = static_cast<int>(rng() % 4), shots = 1 + static_cast<int>(rng() % 4);
    const Dataset d = labeled_dataset(base + ways * sessions + static_cast<int>(rng() % 3), shots + 2, 2);
    const StreamParams p{base, ways, shots, sessions, rng(), static_cast<bool>(rng() & 1)};
    check_stream(build_task_stream(d, p), p);
  }
}

TEST_CASE("realized split round-trips and rebuilds the same stream") {
  fixture::TempDir dir("split");
  const Dataset d = labeled_dataset(10, 8, 2);
  const TaskStream s = build_task_stream(d, {6, 2, 3, 2, 5, true});
  write_split(dir.path() / "split.json", realized_split(s));
  const TaskStream r = stream_from_split(d, read_split(dir.path() / "split.json"));
  REQUIRE(r.session_count() == s.session_count());
  for (int t = 0; t < s.session_count(); ++t) {
    CHECK(r.sessions[static_cast<std::size_t>(t)].class_ids == s.sessions[static_cast<std::size_t>(t)].class_ids);
    REQUIRE(r.train_sets[static_cast<std::size_t>(t)].size() == s.train_sets[static_cast<std::size_t>(t)].size());
    for (std::size_t i = 0; i < s.train_sets[static_cast<std::size_t>(t)].size(); ++i)
      CHECK(r.train_sets[static_cast<std::size_t>(t)][i].sample_id == s.train_sets[static_cast<std::size_t>(t)][i].sample_id);
    CHECK(r.test_sets[static_cast<std::size_t>(t)].size() == s.test_sets[static_cast<std::size_t>(t)].size());
  }
}

TEST_CASE("exported dataset loads back through manifest and folder readers") {
  fixture::TempDir dir("export");
  ToyDatasetConfig cfg;
  cfg.classes = 3;
  cfg.train_per_class = 4;
  cfg.test_per_class = 2;
  const Dataset d = make_toy_dataset(cfg);
  const auto manifest = export_dataset(d, dir.path());
  const Dataset m = load_manifest(manifest);
  REQUIRE(m.train.size() == d.train.size());
  REQUIRE(m.test.size() == d.test.size());
  CHECK(m.class_ids() == d.class_ids());
  // 8-bit quantization bounds the pixel error.
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    CHECK(m.train[i].label == d.train[i].label);
    for (std::size_t k = 0; k < d.train[i].image.pixels.size(); ++k)
      CHECK(std::abs(m.train[i].image.pixels[k] - d.train[i].image.pixels[k]) <= 0.5f / 255.0f + 1e-6f);
  }
  const Dataset f = load_image_folder(dir.path());
  CHECK(f.train.size() == d.train.size());
  CHECK(f.class_ids() == d.class_ids());
}

TEST_CASE("manifest errors are data errors") {
  fixture::TempDir dir("manifest");
  std::ofstream(dir.path() / "m.jsonl") << "{\"path\": \"missing.pgm\", \"label\": 0, \"split\": \"train\"}\n";
  try {
    load_manifest(dir.path() / "m.jsonl");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(exit_code_for(e.code()) == exit_code::data);
  }
}

TEST_CASE("toy dataset is deterministic and balanced") {
  ToyDatasetConfig cfg;
  const Dataset a = make_toy_dataset(cfg), b = make_toy_dataset(cfg);
  REQUIRE(a.train.size() == 500u);
  REQUIRE(a.test.size() == 500u);
  CHECK(a.class_ids().size() == 10u);
  for (std::size_t i = 0; i < a.train.size(); i += 37) CHECK(a.train[i].image == b.train[i].image);
  for (const auto& s : a.train) {
    CHECK(s.image.height == 16);
    for (float v : s.image.pixels) CHECK((v >= 0.0f && v <= 1.0f));
  }
}
