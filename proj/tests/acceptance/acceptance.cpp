// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <algorithm>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "baseline.hpp"
#include "fixtures.hpp"
#include "fscil/commands.hpp"
#include "fscil/config.hpp"
#include "fscil/geometry.hpp"
#include "fscil/losses.hpp"
#include "fscil/metrics.hpp"
#include "fscil/pipeline.hpp"
#include "fscil/subnet.hpp"
#include "oracles.hpp"

using namespace fscil;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

int failures = 0;

void criterion(int index, const std::string& title, const std::function<void(Verdict&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  failures += v.pass ? 0 : 1;
  std::printf("%s %2d %s (%.1fs) %s\n", v.pass ? "PASS" : "FAIL", index, title.c_str(), secs, v.detail.str().c_str());
  std::fflush(stdout);
}

ExperimentConfig toy_config() { return load_config(fs::path(FSCIL_SOURCE_DIR) / "configs" / "toy.json"); }

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

// Prototypes from rows of a random matrix, keyed by frame row order.
std::vector<Prototype> as_prototypes(const Matrix& m) {
  std::vector<Prototype> out;
  for (int i = 0; i < m.rows(); ++i) out.push_back({i, m.row(i).transpose(), 1});
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void etf_geometry(Verdict& v) {
  double worst = 0.0;
  for (int K = 2; K <= 64; ++K) {
    const EtfFrame f = make_etf_frame(K, std::max(K - 1, 64), static_cast<std::uint64_t>(K));
    const Matrix gram = f.vectors * f.vectors.transpose();
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        const double target = i == j ? 1.0 : -1.0 / (K - 1);
        worst = std::max(worst, std::abs(gram(i, j) - target));
      }
  }
  v.detail << "max deviation " << worst;
  v.require(worst <= 1e-6, "inner products or norms off");
}

void loss_oracles(Verdict& v) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + static_cast<int>(rng() % 8), b = 2 + static_cast<int>(rng() % 6);
    const double tau = 0.05 + static_cast<double>(rng() % 100) / 100.0;

    const Matrix z = fixture::unit_rows(fixture::random_matrix(rng, 2 * b, d));
    const auto y = random_labels(rng, 2 * b, 3);
    int anchors = 0;
    const double sum = oracle::supcon_sum(z, y, tau, &anchors);
    const double sup = supcon_loss({z, y, {}}, tau).value;
    worst = std::max(worst, std::abs(anchors ? sup - sum / anchors : sup));

    const auto k = halves_pairing(b);
    worst = std::max(worst, std::abs(selfsup_contrastive_loss({z, std::vector<int>(z.rows(), 0), k}, tau).value -
                                     oracle::selfsup(z, k, tau)));

    const int K = 2 + static_cast<int>(rng() % 5);
    const EtfFrame frame = make_etf_frame(K, std::max(d, K), rng());
    const Matrix learned = fixture::random_matrix(rng, K, frame.dim());
    std::vector<int> rows(static_cast<std::size_t>(K));
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    EtfAssignment a;
    for (int c = 0; c < K; ++c) a[c] = rows[static_cast<std::size_t>(c)];
    worst = std::max(worst, std::abs(etf_alignment_loss(as_prototypes(learned), a, frame).value -
                                     oracle::etf_alignment(learned, frame.vectors, rows)));

    const Matrix logits = fixture::random_matrix(rng, b, 4, 2.0);
    const auto r = random_labels(rng, b, 4);
    worst = std::max(worst, std::abs(rotation_loss(logits, r).value - oracle::cross_entropy(logits, r)));
  }
  v.detail << "max abs difference " << worst;
  v.require(worst <= 1e-10, "loss differs from direct summation");
}

void gradient_checks(Verdict& v) {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng() % 15), b = 2 + static_cast<int>(rng() % 5);
    const double tau = 0.1 + static_cast<double>(rng() % 50) / 100.0;
    const Matrix z = fixture::unit_rows(fixture::random_matrix(rng, 2 * b, d));
    const auto y = random_labels(rng, 2 * b, 3);
    const auto sup = [&](const Matrix& x) { return supcon_loss({x, y, {}}, tau).value; };
    worst = std::max(worst, oracle::relative_error(supcon_loss({z, y, {}}, tau).gradient, oracle::finite_difference(sup, z)));

    const auto k = halves_pairing(b);
    const std::vector<int> none(static_cast<std::size_t>(2 * b), 0);
    const auto self = [&](const Matrix& x) { return selfsup_contrastive_loss({x, none, k}, tau).value; };
    worst = std::max(worst, oracle::relative_error(selfsup_contrastive_loss({z, none, k}, tau).gradient,
                                                   oracle::finite_difference(self, z)));

    const int K = 2 + static_cast<int>(rng() % 4);
    const EtfFrame frame = make_etf_frame(K, std::max(d, K), rng());
    const Matrix learned = fixture::random_matrix(rng, K, frame.dim());
    EtfAssignment a;
    for (int c = 0; c < K; ++c) a[c] = K - 1 - c;
    const auto etf = [&](const Matrix& x) { return etf_alignment_loss(as_prototypes(x), a, frame).value; };
    worst = std::max(worst, oracle::relative_error(etf_alignment_loss(as_prototypes(learned), a, frame).gradient,
                                                   oracle::finite_difference(etf, learned)));

    const Matrix logits = fixture::random_matrix(rng, b, 4, 2.0);
    const auto r = random_labels(rng, b, 4);
    const auto rot = [&](const Matrix& x) { return rotation_loss(x, r).value; };
    worst = std::max(worst, oracle::relative_error(rotation_loss(logits, r).gradient, oracle::finite_difference(rot, logits)));
  }
  v.detail << "max relative error " << worst;
  v.require(worst <= 1e-4, "gradient disagrees with finite differences");
}

void metric_oracles(Verdict& v) {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int classes = 2 + static_cast<int>(rng() % 4), per = 5 + static_cast<int>(rng() % 46);
    const int d = 3 + static_cast<int>(rng() % 8);
    const Matrix z = fixture::random_matrix(rng, classes * per, d);
    std::vector<int> y;
    for (int i = 0; i < classes * per; ++i) y.push_back(i % classes);
    const auto groups = oracle::by_class(z, y);
    const GeometryReport g = geometry_report(z, y, std::vector<int>{0});
    for (const auto& e : g.inter_class)
      worst = std::max(worst, std::abs(e.distance - oracle::inter(oracle::mean_of(groups.at(e.a)),
                                                                  oracle::mean_of(groups.at(e.b)))));
    for (const auto& [c, value] : g.intra_class)
      worst = std::max(worst, std::abs(value - oracle::intra(groups.at(c), oracle::mean_of(groups.at(c)))));
    worst = std::max(worst, std::abs(g.separation - oracle::separation(z, y)));
  }
  double vertex = 0.0;
  for (int K = 2; K <= 5; ++K) {
    const EtfFrame f = make_etf_frame(K, 8, static_cast<std::uint64_t>(K));
    Matrix z(4 * K, 8);
    std::vector<int> y;
    for (int i = 0; i < 4 * K; ++i) {
      z.row(i) = f.vectors.row(i % K) * (1.0 + 0.5 * i);
      y.push_back(i % K);
    }
    const GeometryReport g = geometry_report(z, y, std::vector<int>{});
    for (const auto& [c, value] : g.intra_class) vertex = std::max(vertex, std::abs(value));
    for (const auto& e : g.inter_class) vertex = std::max(vertex, std::abs(e.distance - (1.0 + 1.0 / (K - 1))));
  }
  v.detail << "oracle diff " << worst << ", vertex diff " << vertex;
  v.require(worst <= 1e-10, "metric differs from brute force");
  v.require(vertex <= 1e-6, "vertex data off");
}

void assignment_optimality(Verdict& v) {
  std::mt19937_64 rng(55);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 6);
    const EtfFrame f = make_etf_frame(K, K + static_cast<int>(rng() % 4), rng());
    const Matrix learned = fixture::random_matrix(rng, K, f.dim());
    Matrix score(K, K);
    for (int c = 0; c < K; ++c)
      for (int r = 0; r < K; ++r)
        score(c, r) = oracle::cosine(oracle::row(learned, c), oracle::row(f.vectors, r));
    const auto best = oracle::best_permutation(score);
    const EtfAssignment got = assign_etf_prototypes(f, as_prototypes(learned));
    std::vector<int> chosen;
    for (int c = 0; c < K; ++c) chosen.push_back(got.at(c));
    if (std::abs(oracle::permutation_value(score, chosen) - oracle::permutation_value(score, best)) > 1e-12 ||
        chosen != best)
      ++mismatches;
  }
  v.detail << mismatches << " of 50 differ";
  v.require(mismatches == 0, "assignment is not the exhaustive optimum");
}

void subnet_contracts(Verdict& v) {
  ExperimentConfig config = toy_config();
  const Dataset dataset = load_dataset(config.dataset);
  const TaskStream stream = build_task_stream(dataset, stream_params(config));
  const Encoder init = run_pretraining(config, stream, make_encoder(config, stream));
  const BaseSessionOutcome base = run_base_session(config, stream, init);
  const BatchObjective objective = base_objective(config, base.objective, base.encoder.arch);
  const auto& base_train = stream.train_sets[0];

  MaskSearchConfig full_search = mask_search_config(config);
  full_search.retain_fraction = 1.0;
  const SubnetMask full = extract_subnet_mask(base.encoder, base_train, objective, full_search);
  const double gap = subnet_gap(base.encoder, full, base_train, objective, config.base.batch_size, 0);
  v.detail << "gap@1.0 " << gap;
  v.require(gap == 0.0, "retain 1.0 gap is not zero");

  // Incremental tuning must not touch masked or frozen weights.
  config.subnet.retain_fraction = 0.9;
  RunState state = start_run(config, stream);
  const ParameterSet before = state.encoder.params;
  state = run_incremental_session(config, std::move(state), stream);
  const ParameterSet trainable = trainable_parameters(before, *state.mask, tuning_policy(config));
  std::size_t touched = 0, moved = 0;
  for (std::size_t i = 0; i < before.entries.size(); ++i)
    for (Eigen::Index k = 0; k < before.entries[i].value.size(); ++k) {
      const float a = before.entries[i].value.data()[k], b = state.encoder.params.entries[i].value.data()[k];
      const bool same = std::memcmp(&a, &b, sizeof a) == 0;
      if (trainable.entries[i].value.data()[k] == 0.0f)
        touched += !same;
      else
        moved += !same;
    }
  v.detail << ", protected weights changed " << touched << ", tuned weights changed " << moved;
  v.require(touched == 0, "a masked or frozen weight changed");
  v.require(moved > 0, "incremental tuning changed nothing");

  // 80% subnetwork on base classes, prototypes rebuilt from its own embeddings.
  MaskSearchConfig search = mask_search_config(config);
  search.retain_fraction = 0.8;
  const SubnetMask mask = extract_subnet_mask(base.encoder, base_train, objective, search);
  const auto& test = stream.test_sets[0];
  const auto score = [&](const ParameterSet& params) {
    std::vector<Image> train_images, test_images;
    std::vector<int> train_labels, test_labels;
    for (const auto& s : base_train) {
      train_images.push_back(s.image);
      train_labels.push_back(s.label);
    }
    for (const auto& s : test) {
      test_images.push_back(s.image);
      test_labels.push_back(s.label);
    }
    const PrototypeClassifier clf(class_prototypes(base.encoder.embed_with(params, train_images), train_labels));
    return evaluate_session(clf, base.encoder.embed_with(params, test_images), test_labels, stream.base_classes(), 0)
        .base_accuracy;
  };
  const double whole = score(base.encoder.params);
  const double sub = score(apply_mask(base.encoder.params, mask));
  v.detail << ", base accuracy full " << fmt(whole) << " vs 80% subnet " << fmt(sub);
  v.require(whole - sub <= 0.02, "80% subnetwork loses more than 2 points");
}

void protocol_properties(Verdict& v) {
  std::mt19937_64 rng(1000);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int base = 1 + static_cast<int>(rng() % 8), ways = 1 + static_cast<int>(rng() % 4);
    const int sessions = static_cast<int>(rng() % 6), shots = 1 + static_cast<int>(rng() % 5);
    const int classes = base + ways * sessions + static_cast<int>(rng() % 3);
    Dataset d;
    for (int c = 0; c < classes; ++c) {
      const int label = 3 * c + 1;
      for (int i = 0; i < shots + static_cast<int>(rng() % 3); ++i)
        d.train.push_back({Image(2, 2, 1), label, "tr" + std::to_string(c) + "_" + std::to_string(i)});
      for (int i = 0; i < 2; ++i) d.test.push_back({Image(2, 2, 1), label, "te" + std::to_string(c) + "_" + std::to_string(i)});
    }
    const StreamParams p{base, ways, shots, sessions, rng(), static_cast<bool>(rng() & 1)};
    const TaskStream s = build_task_stream(d, p);
    bool ok = s.session_count() == sessions + 1;
    std::set<int> seen;
    std::size_t previous_test = 0;
    for (int t = 0; ok && t < s.session_count(); ++t) {
      const auto& spec = s.sessions[static_cast<std::size_t>(t)];
      ok = ok && spec.ways() == (t == 0 ? base : ways);
      for (int c : spec.class_ids) ok = ok && seen.insert(c).second;
      std::map<int, int> counts;
      for (const auto& x : s.train_sets[static_cast<std::size_t>(t)]) ++counts[x.label];
      ok = ok && counts.size() == spec.class_ids.size();
      if (t > 0)
        for (const auto& [c, n] : counts) ok = ok && n == shots;
      const auto& test = s.test_sets[static_cast<std::size_t>(t)];
      ok = ok && test.size() > previous_test;
      std::set<std::string> ids;
      for (const auto& x : test) ok = ok && seen.count(x.label) && ids.insert(x.sample_id).second;
      if (t > 0)
        for (const auto& x : s.test_sets[static_cast<std::size_t>(t - 1)]) ok = ok && ids.count(x.sample_id);
      previous_test = test.size();
    }
    bad += ok ? 0 : 1;
  }
  v.detail << bad << " of 1000 streams violate an invariant";
  v.require(bad == 0, "stream invariant violated");
}

void baseline_equivalence(Verdict& v) {
  ExperimentConfig config = toy_config();
  config.tricks = TrickToggles::all_off();
  const Dataset dataset = load_dataset(config.dataset);
  const TaskStream stream = build_task_stream(dataset, stream_params(config));
  const RunState state = run_pipeline(config, stream);
  const std::vector<double> reference = baseline::frozen_baseline_accuracies(config, stream);
  v.require(reference.size() == state.results.size(), "session counts differ");
  for (std::size_t t = 0; t < state.results.size() && t < reference.size(); ++t) {
    v.detail << (t ? ", " : "") << "s" << t << " " << fmt(state.results[t].result.total_accuracy) << "/" << fmt(reference[t]);
    v.require(state.results[t].result.total_accuracy == reference[t], "accuracy differs at session " + std::to_string(t));
  }
}

struct GridResult {
  std::vector<AblationCell> cells;
  const AblationCell& find(const TrickToggles& t) const {
    for (const auto& c : cells)
      if (c.toggles == t) return c;
    throw std::runtime_error("missing ablation cell");
  }
};

void directional(Verdict& v, const GridResult& grid, const ExperimentConfig& config, const Dataset& dataset,
                 const std::vector<std::uint64_t>& seeds) {
  // (a) class separation with SupCon alone versus the cross-entropy baseline, every session and seed.
  TrickToggles supcon_only = TrickToggles::all_off();
  supcon_only.supcon = true;
  bool separated = true;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig off = config, on = config;
    off.seed = on.seed = seed;
    off.tricks = TrickToggles::all_off();
    on.tricks = supcon_only;
    const TaskStream stream = build_task_stream(dataset, stream_params(off));
    const RunState a = run_pipeline(off, stream), b = run_pipeline(on, stream);
    v.detail << "sep seed " << seed << " final " << fmt(b.results.back().geometry.separation) << " vs "
             << fmt(a.results.back().geometry.separation) << "; ";
    for (std::size_t t = 0; t < a.results.size(); ++t)
      separated = separated && b.results[t].geometry.separation > a.results[t].geometry.separation;
  }
  v.require(separated, "(a) SupCon separation not strictly higher");

  // (b) subnet tuning on top of the stability tricks.
  const AblationCell& stab = grid.find(TrickToggles::groups(true, false, false));
  const AblationCell& tuned = grid.find(TrickToggles::groups(true, true, false));
  const double novel_gain = mean(tuned.final_novel_accuracy) - mean(stab.final_novel_accuracy);
  const double base_drop = mean(stab.final_base_accuracy) - mean(tuned.final_base_accuracy);
  v.detail << "novel gain " << fmt(novel_gain) << ", base drop " << fmt(base_drop) << "; ";
  v.require(novel_gain >= 0.03, "(b) novel gain below 3 points");
  v.require(base_drop < 0.03, "(b) base drop of 3 points or more");

  // (c) the full bag over the all-off baseline.
  const double gain = grid.find(TrickToggles::all_on()).mean_final_accuracy() -
                      grid.find(TrickToggles::all_off()).mean_final_accuracy();
  v.detail << "all-on minus all-off " << fmt(gain);
  v.require(gain >= 0.03, "(c) full bag gains less than 3 points");
}

void ablation_shape(Verdict& v, const GridResult& grid) {
  const AblationCell& top = grid.find(TrickToggles::all_on());
  for (const auto& c : grid.cells) {
    v.detail << c.toggles.label() << " " << fmt(c.mean_final_accuracy()) << "; ";
    v.require(c.mean_final_accuracy() <= top.mean_final_accuracy(), "all-on is not the maximum");
  }
  std::vector<AblationRow> rows;
  for (const auto& c : grid.cells) rows.push_back({c, {}});
  const auto drops = ablation_category_drops(rows);
  for (const auto& [name, d] : drops) v.detail << "drop " << name << " " << fmt(d) << "; ";
  v.require(drops.at("stability") > drops.at("adaptability") && drops.at("stability") > drops.at("training"),
            "stability removal is not the largest drop");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(Verdict& v) {
  fixture::TempDir root("accept");
  const ExperimentConfig config = toy_config();
  const RunOutcome a = cmd_run(config, root.path());
  const RunOutcome b = cmd_run(config, root.path());
  v.require(a.run_dir != b.run_dir, "second run reused the directory");
  v.require(slurp(a.run_dir / "results.jsonl") == slurp(b.run_dir / "results.jsonl"), "results.jsonl differs");
  v.require(read_record(a.run_dir / "record.json").to_json(false).dump() ==
                read_record(b.run_dir / "record.json").to_json(false).dump(),
            "record differs outside wall clock");
  v.detail << "final accuracy " << fmt(a.record.final_accuracy());
}

}  // namespace

int main() {
  criterion(1, "ETF geometry for K=2..64", etf_geometry);
  criterion(2, "loss values match direct summation", loss_oracles);
  criterion(3, "loss gradients match finite differences", gradient_checks);
  criterion(4, "metrics match brute force and ETF vertices", metric_oracles);
  criterion(5, "ETF assignment equals exhaustive search", assignment_optimality);
  criterion(6, "subnet contracts", subnet_contracts);
  criterion(7, "task stream properties over 1000 streams", protocol_properties);
  criterion(8, "all-off pipeline equals the frozen baseline", baseline_equivalence);

  const ExperimentConfig config = toy_config();
  const Dataset dataset = load_dataset(config.dataset);
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  GridResult grid;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto toggles = ablation_grid_toggles();
    grid.cells = run_ablation_grid(config, dataset, toggles, seeds);
  } catch (const std::exception& e) {
    std::cerr << "ablation grid failed: " << e.what() << '\n';
  }
  const double grid_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("     ablation grid: 8 cells x 3 seeds in %.1fs\n", grid_secs);

  criterion(9, "directional toy reproduction", [&](Verdict& v) { directional(v, grid, config, dataset, seeds); });
  criterion(10, "ablation grid shape", [&](Verdict& v) { ablation_shape(v, grid); });
  criterion(11, "identical seeds give identical records", determinism);
  return failures == 0 ? 0 : 1;
}
