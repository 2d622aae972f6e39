#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "fscil/error.hpp"
#include "fscil/losses.hpp"
#include "oracles.hpp"

using namespace fscil;

namespace {

std::vector<int> random_labels(std::mt19937_64& rng, int n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng() % static_cast<unsigned>(classes));
  return y;
}

std::vector<int> halves_pairing(int b) {
  std::vector<int> k(2 * static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    k[static_cast<std::size_t>(i)] = i + b;
    k[static_cast<std::size_t>(i + b)] = i;
  }
  return k;
}

}  // namespace

TEST_CASE("supcon matches the summed formula divided by contributing anchors") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 10);
    const Matrix z = fixture::unit_rows(fixture::random_matrix(rng, n, 6));
    const auto y = random_labels(rng, n, 3);
    const double tau = 0.1 + 0.5 * static_cast<double>(rng() % 100) / 100.0;
    int anchors = 0;
    const double sum = oracle::supcon_sum(z, y, tau, &anchors);
    const LossResult r = supcon_loss({z, y, {}}, tau);
    if (anchors == 0) {
      CHECK(r.value == 0.0);
    } else {
      CHECK(r.value * anchors == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("supcon gradient matches finite differences") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = fixture::random_matrix(rng, 8, 4, 0.5);
    const auto y = random_labels(rng, 8, 3);
    const auto f = [&](const Matrix& x) { return supcon_loss({x, y, {}}, 0.3).value; };
    CHECK(oracle::relative_error(supcon_loss({z, y, {}}, 0.3).gradient, oracle::finite_difference(f, z)) < 1e-6);
  }
}

TEST_CASE("self-supervised contrastive loss matches the formula and checks pairing") {
  std::mt19937_64 rng(13);
  const Matrix z = fixture::unit_rows(fixture::random_matrix(rng, 10, 5));
  const auto k = halves_pairing(5);
  const LossResult r = selfsup_contrastive_loss({z, std::vector<int>(10, 0), k}, 0.2);
  CHECK(r.value == doctest::Approx(oracle::selfsup(z, k, 0.2)).epsilon(1e-12));
  const auto f = [&](const Matrix& x) { return selfsup_contrastive_loss({x, std::vector<int>(10, 0), k}, 0.2).value; };
  CHECK(oracle::relative_error(r.gradient, oracle::finite_difference(f, z)) < 1e-6);

  auto bad = k;
  bad[0] = 0;
  try {
    selfsup_contrastive_loss({z, std::vector<int>(10, 0), bad}, 0.2);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_pairing);
  }
}

TEST_CASE("temperature must be positive") {
  const Matrix z = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(supcon_loss({z, {0, 0}, {}}, 0.0), Error);
  CHECK_THROWS_AS(selfsup_contrastive_loss({z, {0, 0}, {1, 0}}, -1.0), Error);
}

TEST_CASE("ETF alignment: zero at the frame, formula and gradient") {
  const EtfFrame f = make_etf_frame(4, 6, 1);
  EtfAssignment a{{10, 2}, {11, 0}, {12, 3}, {13, 1}};
  std::vector<Prototype> exact;
  for (const auto& [c, row] : a) exact.push_back({c, f.vectors.row(row).transpose(), 1});
  CHECK(etf_alignment_loss(exact, a, f).value == doctest::Approx(0.0));

  std::mt19937_64 rng(14);
  const Matrix learned = fixture::random_matrix(rng, 4, 6);
  std::vector<Prototype> ps;
  std::vector<int> rows;
  int i = 0;
  for (const auto& [c, row] : a) {
    ps.push_back({c, learned.row(i++).transpose(), 1});
    rows.push_back(row);
  }
  const LossResult r = etf_alignment_loss(ps, a, f);
  CHECK(r.value == doctest::Approx(oracle::etf_alignment(learned, f.vectors, rows)).epsilon(1e-12));
  const auto fn = [&](const Matrix& x) {
    std::vector<Prototype> q;
    int k = 0;
    for (const auto& [c, row] : a) q.push_back({c, x.row(k++).transpose(), 1});
    return etf_alignment_loss(q, a, f).value;
  };
  CHECK(oracle::relative_error(r.gradient, oracle::finite_difference(fn, learned)) < 1e-7);

  ps.push_back({99, Vector::Zero(6), 1});
  try {
    etf_alignment_loss(ps, a, f);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_assignment);
  }
}

TEST_CASE("rotation and cross-entropy losses") {
  std::mt19937_64 rng(15);
  const Matrix logits = fixture::random_matrix(rng, 7, 4, 2.0);
  const auto y = random_labels(rng, 7, 4);
  const LossResult r = rotation_loss(logits, y);
  CHECK(r.value == doctest::Approx(oracle::cross_entropy(logits, y)).epsilon(1e-12));
  const auto f = [&](const Matrix& x) { return rotation_loss(x, y).value; };
  CHECK(oracle::relative_error(r.gradient, oracle::finite_difference(f, logits)) < 1e-7);
  CHECK_THROWS_AS(rotation_loss(Matrix::Zero(2, 3), std::vector<int>{0, 1}), Error);
  CHECK_THROWS_AS(rotation_loss(Matrix::Zero(2, 4), std::vector<int>{0, 4}), Error);

  // Large logits stay finite.
  Matrix big = Matrix::Zero(2, 3);
  big(0, 0) = 1000;
  big(1, 2) = -1000;
  const LossResult ce = cross_entropy_loss(big, std::vector<int>{0, 1});
  CHECK(std::isfinite(ce.value));
}

TEST_CASE("composite loss is the weighted sum") {
  LossResult a{2.0, Matrix::Ones(2, 2)}, b{3.0, Matrix::Constant(2, 2, 2.0)};
  LossConfig cfg;
  cfg.weights = {{kLossSupcon, 1.0}, {kLossEtf, 0.5}};
  const LossResult c = composite_loss({{kLossSupcon, a}, {kLossEtf, b}}, cfg);
  CHECK(c.value == doctest::Approx(3.5));
  CHECK(c.gradient(1, 1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(composite_loss({{kLossSupcon, a}}, cfg), Error);
  LossResult wrong{1.0, Matrix::Ones(3, 2)};
  CHECK_THROWS_AS(composite_loss({{kLossSupcon, a}, {kLossEtf, wrong}}, cfg), Error);
  cfg.weights = {{"bogus", 1.0}};
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("row normalization backward matches finite differences") {
  std::mt19937_64 rng(16);
  const Matrix raw = fixture::random_matrix(rng, 5, 4);
  const Matrix upstream = fixture::random_matrix(rng, 5, 4);
  const auto f = [&](const Matrix& x) { return normalize_rows(x).normalized.cwiseProduct(upstream).sum(); };
  const RowNormalization n = normalize_rows(raw);
  CHECK(oracle::relative_error(normalize_rows_backward(n, upstream), oracle::finite_difference(f, raw)) < 1e-7);
}
