#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fscil {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Prototype {
  int class_id = 0;
  Vector vector;
  int support_count = 0;
};

// Arithmetic mean of the given d-vectors.
Prototype compute_prototype(int class_id, std::span<const Vector> embeddings);
// Mean of the rows of `embeddings`.
Prototype compute_prototype(int class_id, const Matrix& embeddings);

Prototype normalized(Prototype p);

// Per-class L2-normalized prototypes from row embeddings, ordered by class id.
std::vector<Prototype> class_prototypes(const Matrix& embeddings, std::span<const int> labels);

/// K unit vectors in R^d whose pairwise inner products all equal -1/(K-1).
struct EtfFrame {
  Matrix vectors;  // K x d, one frame vector per row

  int count() const noexcept { return static_cast<int>(vectors.rows()); }
  int dim() const noexcept { return static_cast<int>(vectors.cols()); }
};

/// Builds the centered simplex in its (K-1)-dimensional span and lifts it
/// into R^d with a seeded random orthonormal basis. Requires K >= 2 and
/// d >= K-1.
EtfFrame make_etf_frame(int K, int d, std::uint64_t seed = 0);

// class id -> frame row
using EtfAssignment = std::map<int, int>;

/// One-to-one matching of learned prototypes to frame rows maximizing the
/// total cosine alignment.
EtfAssignment assign_etf_prototypes(const EtfFrame& frame, std::span<const Prototype> learned);

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the chosen column per row.
std::vector<int> solve_assignment(const Matrix& cost);

struct Prediction {
  int class_id = -1;
  Vector scores;  // cosine similarity per prototype, classifier order
};

/// Cosine nearest-prototype classifier over every class seen so far.
class PrototypeClassifier {
 public:
  PrototypeClassifier() = default;
  explicit PrototypeClassifier(std::vector<Prototype> prototypes);

  const std::vector<Prototype>& prototypes() const noexcept { return prototypes_; }
  std::vector<int> class_ids() const;
  std::size_t size() const noexcept { return prototypes_.size(); }
  bool empty() const noexcept { return prototypes_.empty(); }
  bool covers(int class_id) const;

  Prediction classify(const Vector& embedding) const;
  // New classifier covering the union; existing prototypes are untouched.
  PrototypeClassifier expand(std::span<const Prototype> new_prototypes) const;

 private:
  std::vector<Prototype> prototypes_;
};

Prediction classify(const PrototypeClassifier& classifier, const Vector& embedding);
PrototypeClassifier expand_classifier(const PrototypeClassifier& classifier, std::span<const Prototype> added);

// Flat numeric table: magic, version, K, d, K class ids, then K*d doubles.
struct PrototypeTable {
  std::vector<int> class_ids;
  Matrix values;  // K x d
};

void write_prototype_table(const std::filesystem::path& path, const PrototypeTable& table);
PrototypeTable read_prototype_table(const std::filesystem::path& path);

PrototypeTable to_table(const PrototypeClassifier& classifier);
PrototypeClassifier classifier_from_table(const PrototypeTable& table);

}  // namespace fscil
