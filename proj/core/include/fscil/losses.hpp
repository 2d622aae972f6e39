#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fscil/geometry.hpp"

namespace fscil {

/// B x d embeddings (rows) with class labels and an optional view pairing.
/// Losses treat the rows as given; use `normalized()` to build a batch of
/// unit vectors from raw encoder outputs.
struct EmbeddingBatch {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<int> view_pair;  // view_pair[i] = index of i's other view; empty if unpaired

  Eigen::Index size() const noexcept { return embeddings.rows(); }

  static EmbeddingBatch normalized(const Matrix& raw, std::vector<int> labels, std::vector<int> view_pair = {});
};

struct LossResult {
  double value = 0.0;
  Matrix gradient;  // same shape as the differentiated input
};

// Recognized weight keys.
inline constexpr const char* kLossSupcon = "supcon";
inline constexpr const char* kLossEtf = "etf";
inline constexpr const char* kLossRotation = "rotation";
inline constexpr const char* kLossCrossEntropy = "cross_entropy";
inline constexpr const char* kLossSelfsup = "selfsup";

struct LossConfig {
  double temperature = 0.07;
  std::map<std::string, double> weights;

  double weight(const std::string& part) const;
  // Throws on tau <= 0, unknown or negative weights, or all weights zero.
  void validate() const;
};

/// Supervised contrastive loss. Each anchor averages -log softmax over its
/// same-label partners with the softmax taken over every other row. Anchors
/// without a partner are skipped; the result is the mean over the rest.
LossResult supcon_loss(const EmbeddingBatch& batch, double tau);

/// Contrastive loss with exactly one positive per anchor, the paired view.
LossResult selfsup_contrastive_loss(const EmbeddingBatch& batch, double tau);

/// Mean squared distance between each learned prototype and its assigned
/// frame vector. Gradient rows follow the order of `learned`.
LossResult etf_alignment_loss(std::span<const Prototype> learned, const EtfAssignment& assignment,
                              const EtfFrame& frame);

/// Mean softmax cross-entropy.
LossResult cross_entropy_loss(const Matrix& logits, std::span<const int> labels);

/// Four-way rotation prediction cross-entropy; labels must lie in {0,1,2,3}.
LossResult rotation_loss(const Matrix& logits, std::span<const int> labels);

/// Weighted sum of parts. Every part with non-zero weight must be present and
/// all gradients must share one shape.
LossResult composite_loss(const std::map<std::string, LossResult>& parts, const LossConfig& config);

/// Row-wise L2 normalization with its backward pass.
struct RowNormalization {
  Matrix normalized;
  Vector norms;
};
RowNormalization normalize_rows(const Matrix& raw);
Matrix normalize_rows_backward(const RowNormalization& forward, const Matrix& grad_normalized);

}  // namespace fscil
