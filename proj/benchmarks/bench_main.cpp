#include <benchmark/benchmark.h>

#include <random>

#include "fscil/geometry.hpp"
#include "fscil/losses.hpp"
#include "fscil/nn.hpp"

using namespace fscil;

namespace {

Matrix random_unit_rows(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  m.rowwise().normalize();
  return m;
}

std::vector<int> labels(int n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % classes;
  return y;
}

void BM_SupCon(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const EmbeddingBatch batch{random_unit_rows(n, 64, 1), labels(n, 12), {}};
  for (auto _ : state) benchmark::DoNotOptimize(supcon_loss(batch, 0.07));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SupCon)->Arg(64)->Arg(256)->Arg(512);

void BM_SelfSup(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  std::vector<int> pair(2 * static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    pair[static_cast<std::size_t>(i)] = i + b;
    pair[static_cast<std::size_t>(i + b)] = i;
  }
  const EmbeddingBatch batch{random_unit_rows(2 * b, 64, 2), std::vector<int>(pair.size(), 0), pair};
  for (auto _ : state) benchmark::DoNotOptimize(selfsup_contrastive_loss(batch, 0.07));
}
BENCHMARK(BM_SelfSup)->Arg(64)->Arg(256);

void BM_EtfFrame(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(make_etf_frame(K, std::max(K - 1, 64), 3));
}
BENCHMARK(BM_EtfFrame)->Arg(10)->Arg(60)->Arg(100);

void BM_EtfAssignment(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const EtfFrame frame = make_etf_frame(K, std::max(K - 1, 64), 4);
  const Matrix learned = random_unit_rows(K, frame.dim(), 5);
  std::vector<Prototype> ps;
  for (int i = 0; i < K; ++i) ps.push_back({i, learned.row(i).transpose(), 1});
  for (auto _ : state) benchmark::DoNotOptimize(assign_etf_prototypes(frame, ps));
}
BENCHMARK(BM_EtfAssignment)->Arg(10)->Arg(60)->Arg(100);

void BM_Conv4Forward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const Architecture arch = Architecture::conv4(1, 16, {8, 16, 32, 64}, 64);
  const ParameterSet params = init_parameters(arch, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u;
  Tensor input(arch.input.channels, static_cast<Eigen::Index>(batch) * arch.input.height * arch.input.width);
  for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(arch, params, input, batch));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Conv4Forward)->Arg(16)->Arg(64);

void BM_Conv4Backward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const Architecture arch = Architecture::conv4(1, 16, {8, 16, 32, 64}, 64);
  const ParameterSet params = init_parameters(arch, 6);
  Tensor input = Tensor::Random(arch.input.channels, static_cast<Eigen::Index>(batch) * 16 * 16);
  ForwardCache cache;
  const Tensor out = forward(arch, params, input, batch, &cache);
  const Tensor upstream = Tensor::Ones(out.rows(), out.cols());
  for (auto _ : state) benchmark::DoNotOptimize(backward(arch, params, cache, upstream));
}
BENCHMARK(BM_Conv4Backward)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
