#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "fscil/error.hpp"
#include "fscil/nn.hpp"
#include "oracles.hpp"

using namespace fscil;

namespace {

std::vector<Image> random_images(std::mt19937_64& rng, int n, int size, int channels) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image img(size, size, channels);
    for (auto& p : img.pixels) p = u(rng);
    out.push_back(std::move(img));
  }
  return out;
}

// Loss = sum(output .* weights); checks every parameter's analytic gradient.
void check_gradients(const Architecture& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto images = random_images(rng, 3, arch.input.height, arch.input.channels);
  ParameterSet params = init_parameters(arch, seed);
  for (auto& e : params.entries)
    if (e.name.ends_with(".bias")) e.value.setConstant(0.05f);
  const Tensor x = pack_images(images, arch.input);
  const Tensor probe = fixture::random_matrix(rng, arch.embedding_dim(), 3).cast<float>();
  ForwardCache cache;
  forward(arch, params, x, 3, &cache);
  const ParameterSet grads = backward(arch, params, cache, probe);
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& p = params.entries[i].value;
    const int stride = std::max<int>(1, static_cast<int>(p.size() / 12));
    for (Eigen::Index k = 0; k < p.size(); k += stride) {
      const float keep = p.data()[k];
      const float h = 3e-3f;
      p.data()[k] = keep + h;
      const double up = forward(arch, params, x, 3).cwiseProduct(probe).cast<double>().sum();
      p.data()[k] = keep - h;
      const double down = forward(arch, params, x, 3).cwiseProduct(probe).cast<double>().sum();
      p.data()[k] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = grads.entries[i].value.data()[k];
      CHECK(std::abs(fd - an) <= 2e-2 * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("conv4 shapes") {
  const Architecture a = Architecture::conv4(1, 16, {4, 8, 8, 8}, 12);
  const auto shapes = a.shapes();
  REQUIRE(shapes.size() == 5u);
  CHECK(shapes[0].height == 8);
  CHECK(shapes[2].height == 2);
  CHECK(shapes[3].height == 1);
  CHECK(shapes[3].channels == 8);
  CHECK(a.embedding_dim() == 12);
  CHECK(a.layer_names() == std::vector<std::string>{"block1", "block2", "block3", "block4", "embed"});
}

TEST_CASE("forward output shape and determinism") {
  const Architecture a = Architecture::conv4(3, 8, {4, 4, 4, 4}, 6);
  std::mt19937_64 rng(1);
  const auto images = random_images(rng, 5, 8, 3);
  Encoder e{a, init_parameters(a, 9)};
  const Matrix y = e.embed(images);
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 6);
  CHECK(y == e.embed(images));
  CHECK(init_parameters(a, 9) == e.params);
  CHECK_FALSE(init_parameters(a, 10) == e.params);
}

TEST_CASE("backward matches finite differences: conv stack") {
  check_gradients(Architecture::conv4(2, 8, {3, 4, 4, 5}, 4), 21);
}

TEST_CASE("backward matches finite differences: mlp") {
  check_gradients(Architecture::mlp({1, 3, 3}, {7, 5}, 4, true), 22);
}

TEST_CASE("linear head gradients") {
  std::mt19937_64 rng(3);
  const LinearHead h = LinearHead::make(5, 3, 1);
  const Matrix x = fixture::random_matrix(rng, 4, 5);
  const Matrix g = fixture::random_matrix(rng, 4, 3);
  ParameterSet grads = h.params.zeros_like();
  const Matrix dx = h.backward(x, g, grads);
  const auto f = [&](const Matrix& in) { return h.forward(in).cwiseProduct(g).sum(); };
  CHECK(oracle::relative_error(dx, oracle::finite_difference(f, x)) < 1e-6);
  CHECK(grads.at("bias")(1, 0) == doctest::Approx(g.col(1).sum()).epsilon(1e-5));
}

TEST_CASE("sgd never touches frozen entries") {
  const Architecture a = Architecture::mlp({1, 2, 2}, {3}, 2, true);
  ParameterSet p = init_parameters(a, 1);
  const ParameterSet before = p;
  ParameterSet grads = p.zeros_like();
  for (auto& e : grads.entries) e.value.setConstant(1.0f);
  ParameterSet trainable = p.zeros_like();
  trainable.at("out.weight").setConstant(1.0f);
  Sgd sgd({0.9, 1e-3});
  for (int i = 0; i < 3; ++i) sgd.step(p, grads, 0.1, &trainable);
  CHECK(p.at("fc1.weight") == before.at("fc1.weight"));
  CHECK(p.at("out.bias") == before.at("out.bias"));
  CHECK_FALSE(p.at("out.weight") == before.at("out.weight"));
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0.1, 0, 10) == doctest::Approx(0.1));
  CHECK(cosine_lr(0.1, 5, 10) == doctest::Approx(0.05));
  CHECK(cosine_lr(0.1, 9, 10) > 0.0);
}

TEST_CASE("parameter files round-trip and reject garbage") {
  fixture::TempDir dir("params");
  const Architecture a = Architecture::conv4(1, 8, {2, 2, 2, 2}, 3);
  const ParameterSet p = init_parameters(a, 4);
  write_parameters(dir.path() / "p.bin", p);
  CHECK(read_parameters(dir.path() / "p.bin") == p);
  std::ofstream(dir.path() / "bad.bin") << "FSPSxx";
  CHECK_THROWS_AS(read_parameters(dir.path() / "bad.bin"), Error);
}
