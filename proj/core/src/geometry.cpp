#include "fscil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

Prototype compute_prototype(int class_id, std::span<const Vector> embeddings) {
  if (embeddings.empty()) fail(ErrorCode::empty_input, "prototype of class " + std::to_string(class_id) + " needs samples");
  const auto d = embeddings.front().size();
  Vector sum = Vector::Zero(d);
  for (const auto& e : embeddings) {
    if (e.size() != d) fail(ErrorCode::dimension_mismatch, "embedding dimensions differ within a class");
    sum += e;
  }
  return {class_id, sum / static_cast<double>(embeddings.size()), static_cast<int>(embeddings.size())};
}

Prototype compute_prototype(int class_id, const Matrix& embeddings) {
  if (embeddings.rows() == 0) fail(ErrorCode::empty_input, "prototype of class " + std::to_string(class_id) + " needs samples");
  return {class_id, embeddings.colwise().mean().transpose(), static_cast<int>(embeddings.rows())};
}

Prototype normalized(Prototype p) {
  const double n = p.vector.norm();
  if (n > 0) p.vector /= n;
  return p;
}

std::vector<Prototype> class_prototypes(const Matrix& embeddings, std::span<const int> labels) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    fail(ErrorCode::dimension_mismatch, "one label per embedding row required");
  std::map<int, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<Prototype> out;
  for (const auto& [label, idx] : rows) out.push_back(normalized(compute_prototype(label, embeddings(idx, Eigen::all))));
  return out;
}

EtfFrame make_etf_frame(int K, int d, std::uint64_t seed) {
  if (K < 2) fail(ErrorCode::invalid_argument, "an ETF needs at least two vectors");
  if (d < K - 1)
    fail(ErrorCode::dimension_too_small,
         "a simplex ETF of " + std::to_string(K) + " vectors needs d >= " + std::to_string(K - 1));

  // Orthonormal basis of the sum-zero subspace of R^K.
  const Matrix centering = Matrix::Identity(K, K) - Matrix::Constant(K, K, 1.0 / K);
  Eigen::HouseholderQR<Matrix> qr_center(centering);
  const Matrix basis = (qr_center.householderQ() * Matrix::Identity(K, K)).leftCols(K - 1);
  // Columns are the simplex vertices in K-1 coordinates, scaled to unit norm.
  const Matrix simplex = std::sqrt(static_cast<double>(K) / (K - 1)) * basis.transpose() * centering;

  Rng rng(derive_seed(seed, "etf-lift"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(d, K - 1);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr_lift(g);
  const Matrix lift = (qr_lift.householderQ() * Matrix::Identity(d, K - 1));

  EtfFrame frame;
  frame.vectors = (lift * simplex).transpose();
  frame.vectors.rowwise().normalize();
  return frame;
}

std::vector<int> solve_assignment(const Matrix& cost) {
  // Shortest augmenting path Hungarian method with potentials, O(n^2 m).
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) fail(ErrorCode::too_many_classes, "more rows than columns in assignment");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);  // match[col] = row (1-based)
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

EtfAssignment assign_etf_prototypes(const EtfFrame& frame, std::span<const Prototype> learned) {
  if (static_cast<int>(learned.size()) > frame.count())
    fail(ErrorCode::too_many_classes, std::to_string(learned.size()) + " classes for " +
                                          std::to_string(frame.count()) + " frame vectors");
  Matrix cost(static_cast<Eigen::Index>(learned.size()), frame.count());
  std::set<int> ids;
  for (std::size_t i = 0; i < learned.size(); ++i) {
    if (learned[i].vector.size() != frame.dim())
      fail(ErrorCode::dimension_mismatch, "prototype dimension differs from frame dimension");
    if (!ids.insert(learned[i].class_id).second)
      fail(ErrorCode::duplicate_class, "class " + std::to_string(learned[i].class_id) + " listed twice");
    const double n = learned[i].vector.norm();
    for (int k = 0; k < frame.count(); ++k)
      cost(static_cast<Eigen::Index>(i), k) = n > 0 ? -frame.vectors.row(k).dot(learned[i].vector) / n : 0.0;
  }
  const auto cols = solve_assignment(cost);
  EtfAssignment out;
  for (std::size_t i = 0; i < learned.size(); ++i) out[learned[i].class_id] = cols[i];
  return out;
}

PrototypeClassifier::PrototypeClassifier(std::vector<Prototype> prototypes) {
  *this = PrototypeClassifier{}.expand(prototypes);
}

std::vector<int> PrototypeClassifier::class_ids() const {
  std::vector<int> ids;
  ids.reserve(prototypes_.size());
  for (const auto& p : prototypes_) ids.push_back(p.class_id);
  return ids;
}

bool PrototypeClassifier::covers(int class_id) const {
  return std::any_of(prototypes_.begin(), prototypes_.end(), [&](const Prototype& p) { return p.class_id == class_id; });
}

Prediction PrototypeClassifier::classify(const Vector& embedding) const {
  if (prototypes_.empty()) fail(ErrorCode::empty_input, "classifier has no prototypes");
  Prediction out;
  out.scores.resize(static_cast<Eigen::Index>(prototypes_.size()));
  const double en = embedding.norm();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < prototypes_.size(); ++k) {
    const auto& p = prototypes_[k];
    if (p.vector.size() != embedding.size())
      fail(ErrorCode::dimension_mismatch, "embedding dimension differs from prototypes");
    const double pn = p.vector.norm();
    const double score = (en > 0 && pn > 0) ? p.vector.dot(embedding) / (pn * en) : 0.0;
    out.scores[static_cast<Eigen::Index>(k)] = score;
    if (score > best || (score == best && p.class_id < out.class_id)) {
      best = score;
      out.class_id = p.class_id;
    }
  }
  return out;
}

PrototypeClassifier PrototypeClassifier::expand(std::span<const Prototype> new_prototypes) const {
  PrototypeClassifier out = *this;
  for (const auto& p : new_prototypes) {
    if (out.covers(p.class_id))
      fail(ErrorCode::duplicate_class, "class " + std::to_string(p.class_id) + " already in classifier");
    if (!out.prototypes_.empty() && p.vector.size() != out.prototypes_.front().vector.size())
      fail(ErrorCode::dimension_mismatch, "prototype dimension differs from classifier");
    out.prototypes_.push_back(p);
  }
  return out;
}

Prediction classify(const PrototypeClassifier& classifier, const Vector& embedding) {
  return classifier.classify(embedding);
}

PrototypeClassifier expand_classifier(const PrototypeClassifier& classifier, std::span<const Prototype> added) {
  return classifier.expand(added);
}

namespace {
constexpr char kTableMagic[4] = {'F', 'S', 'P', 'T'};
constexpr std::uint32_t kTableVersion = 1;
}  // namespace

void write_prototype_table(const std::filesystem::path& path, const PrototypeTable& table) {
  if (static_cast<std::size_t>(table.values.rows()) != table.class_ids.size())
    fail(ErrorCode::dimension_mismatch, "one class id per table row required");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  const std::uint32_t K = static_cast<std::uint32_t>(table.values.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(table.values.cols());
  out.write(kTableMagic, 4);
  out.write(reinterpret_cast<const char*>(&kTableVersion), sizeof kTableVersion);
  out.write(reinterpret_cast<const char*>(&K), sizeof K);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  for (int id : table.class_ids) {
    const std::int32_t v = id;
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = table.values;
  out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(double)));
}

PrototypeTable read_prototype_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  char magic[4];
  std::uint32_t version = 0, K = 0, d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&K), sizeof K);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!in || std::memcmp(magic, kTableMagic, 4) != 0) fail(ErrorCode::corrupt_checkpoint, "bad prototype table header");
  if (version != kTableVersion) fail(ErrorCode::version_mismatch, "prototype table version " + std::to_string(version));
  PrototypeTable table;
  table.class_ids.resize(K);
  for (auto& id : table.class_ids) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    id = v;
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(K, d);
  in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(double)));
  if (!in) fail(ErrorCode::corrupt_checkpoint, "truncated prototype table " + path.string());
  table.values = rows;
  return table;
}

PrototypeTable to_table(const PrototypeClassifier& classifier) {
  PrototypeTable t;
  const auto& ps = classifier.prototypes();
  const auto d = ps.empty() ? 0 : ps.front().vector.size();
  t.values.resize(static_cast<Eigen::Index>(ps.size()), d);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    t.class_ids.push_back(ps[i].class_id);
    t.values.row(static_cast<Eigen::Index>(i)) = ps[i].vector.transpose();
  }
  return t;
}

PrototypeClassifier classifier_from_table(const PrototypeTable& table) {
  std::vector<Prototype> ps;
  for (std::size_t i = 0; i < table.class_ids.size(); ++i)
    ps.push_back({table.class_ids[i], table.values.row(static_cast<Eigen::Index>(i)).transpose(), 0});
  return PrototypeClassifier(std::move(ps));
}

}  // namespace fscil
