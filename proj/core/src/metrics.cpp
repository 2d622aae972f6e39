#include "fscil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fscil/error.hpp"

namespace fscil {

namespace {

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::invalid_argument, "cosine of a zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace

double inter_class_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "prototype dimensions differ");
  return 1.0 - cosine(a, b);
}

double intra_class_distance(const Matrix& samples, const Vector& prototype) {
  if (samples.rows() == 0) fail(ErrorCode::empty_input, "intra-class distance needs samples");
  if (samples.cols() != prototype.size()) fail(ErrorCode::dimension_mismatch, "sample and prototype dimensions differ");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) sum += 1.0 - cosine(samples.row(i).transpose(), prototype);
  return sum / static_cast<double>(samples.rows());
}

double class_separation(const Matrix& embeddings, std::span<const int> labels) {
  if (embeddings.rows() < 2) fail(ErrorCode::empty_input, "class separation needs at least two samples");
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    fail(ErrorCode::dimension_mismatch, "one label per embedding row required");
  // sum_{i,j} cos(z_ci, z_dj) = n_c n_d <mu_c, mu_d> with mu the mean of unit rows.
  std::map<int, std::pair<Vector, int>> acc;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const double n = embeddings.row(i).norm();
    if (n == 0.0) fail(ErrorCode::invalid_argument, "zero embedding row");
    auto& [sum, count] = acc.try_emplace(labels[static_cast<std::size_t>(i)], Vector::Zero(embeddings.cols()), 0).first->second;
    sum += embeddings.row(i).transpose() / n;
    ++count;
  }
  const double C = static_cast<double>(acc.size());
  double within = 0.0;
  Vector mean_of_means = Vector::Zero(embeddings.cols());
  for (const auto& [label, entry] : acc) {
    const Vector mu = entry.first / static_cast<double>(entry.second);
    within += (1.0 - mu.squaredNorm()) / C;
    mean_of_means += mu / C;
  }
  const double total = 1.0 - mean_of_means.squaredNorm();
  if (std::abs(total) < 1e-12) fail(ErrorCode::undefined_separation, "all embeddings point the same way");
  return 1.0 - within / total;
}

std::vector<CdfPoint> cumulative_distance_distribution(std::span<const double> values, int grid_points) {
  if (grid_points < 2) fail(ErrorCode::invalid_argument, "CDF grid needs at least two points");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  out.reserve(static_cast<std::size_t>(grid_points));
  for (int k = 0; k < grid_points; ++k) {
    const double t = 2.0 * k / (grid_points - 1);
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, sorted.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(sorted.size())});
  }
  return out;
}

SessionResult evaluate_session(const PrototypeClassifier& classifier, const Matrix& test_embeddings,
                               std::span<const int> labels, std::span<const int> base_class_ids, int session_index) {
  if (static_cast<std::size_t>(test_embeddings.rows()) != labels.size())
    fail(ErrorCode::dimension_mismatch, "one label per test embedding required");
  SessionResult r;
  r.session_index = session_index;
  r.class_order = classifier.class_ids();
  std::sort(r.class_order.begin(), r.class_order.end());
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < r.class_order.size(); ++i) pos[r.class_order[i]] = i;
  for (int y : labels)
    if (!pos.count(y)) fail(ErrorCode::uncovered_label, "test label " + std::to_string(y) + " not covered by classifier");

  const std::size_t C = r.class_order.size();
  r.confusion.assign(C, std::vector<long>(C, 0));
  for (Eigen::Index i = 0; i < test_embeddings.rows(); ++i) {
    const int pred = classifier.classify(test_embeddings.row(i).transpose()).class_id;
    ++r.confusion[pos[labels[static_cast<std::size_t>(i)]]][pos[pred]];
  }

  const std::set<int> base(base_class_ids.begin(), base_class_ids.end());
  long correct = 0, total = 0, base_correct = 0, base_total = 0, novel_correct = 0, novel_total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    long row = 0;
    for (long v : r.confusion[c]) row += v;
    const long hit = r.confusion[c][c];
    if (row > 0) r.per_class_accuracy[r.class_order[c]] = static_cast<double>(hit) / static_cast<double>(row);
    correct += hit;
    total += row;
    if (base.count(r.class_order[c])) {
      base_correct += hit;
      base_total += row;
    } else {
      novel_correct += hit;
      novel_total += row;
    }
  }
  if (total == 0) fail(ErrorCode::empty_input, "empty test set");
  r.total_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  r.base_accuracy = base_total ? static_cast<double>(base_correct) / static_cast<double>(base_total) : 0.0;
  if (novel_total) r.novel_accuracy = static_cast<double>(novel_correct) / static_cast<double>(novel_total);
  return r;
}

SessionResult evaluate_session(const PrototypeClassifier& classifier, const Encoder& encoder,
                               std::span<const LabeledSample> test_set, std::span<const int> base_class_ids,
                               int session_index) {
  std::vector<Image> images;
  std::vector<int> labels;
  images.reserve(test_set.size());
  for (const auto& s : test_set) {
    images.push_back(s.image);
    labels.push_back(s.label);
  }
  return evaluate_session(classifier, encoder.embed(images), labels, base_class_ids, session_index);
}

double GeometryReport::inter(int a, int b) const {
  if (a == b) return 0.0;
  if (a > b) std::swap(a, b);
  for (const auto& e : inter_class)
    if (e.a == a && e.b == b) return e.distance;
  fail(ErrorCode::out_of_range, "no inter-class entry for pair");
}

GeometryReport geometry_report(const Matrix& embeddings, std::span<const int> labels,
                               std::span<const int> base_class_ids) {
  const auto protos = class_prototypes(embeddings, labels);
  GeometryReport g;
  for (std::size_t i = 0; i < protos.size(); ++i)
    for (std::size_t j = i + 1; j < protos.size(); ++j)
      g.inter_class.push_back({protos[i].class_id, protos[j].class_id,
                               inter_class_distance(protos[i].vector, protos[j].vector)});
  std::map<int, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(static_cast<Eigen::Index>(i));
  for (const auto& p : protos) g.intra_class[p.class_id] = intra_class_distance(embeddings(rows[p.class_id], Eigen::all), p.vector);
  g.separation = class_separation(embeddings, labels);

  const std::set<int> base(base_class_ids.begin(), base_class_ids.end());
  std::vector<Eigen::Index> base_rows, novel_rows;
  std::vector<int> base_labels, novel_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (base.count(labels[i])) {
      base_rows.push_back(static_cast<Eigen::Index>(i));
      base_labels.push_back(labels[i]);
    } else {
      novel_rows.push_back(static_cast<Eigen::Index>(i));
      novel_labels.push_back(labels[i]);
    }
  }
  auto sep = [&](const std::vector<Eigen::Index>& r, const std::vector<int>& l) -> std::optional<double> {
    if (r.size() < 2) return std::nullopt;
    try {
      return class_separation(embeddings(r, Eigen::all), l);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  g.separation_base = sep(base_rows, base_labels);
  g.separation_novel = sep(novel_rows, novel_labels);
  return g;
}

}  // namespace fscil
