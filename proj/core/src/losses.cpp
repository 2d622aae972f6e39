#include "fscil/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fscil/error.hpp"

namespace fscil {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::invalid_argument, "temperature must be positive");
}

// Shared contrastive core: for anchor i, positives[i] lists partner rows;
// loss_i = -(1/|P_i|) sum_p log softmax_{k != i}(s_ik / tau)[p].
// Anchors with no positives are skipped; the total is averaged over the rest.
LossResult contrastive(const Matrix& z, const std::vector<std::vector<Eigen::Index>>& positives, double tau) {
  const Eigen::Index n = z.rows();
  const Matrix sim = (z * z.transpose()) / tau;
  Matrix coeff = Matrix::Zero(n, n);  // d loss / d sim
  double total = 0.0;
  Eigen::Index anchors = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pos = positives[static_cast<std::size_t>(i)];
    if (pos.empty()) continue;
    ++anchors;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) mx = std::max(mx, sim(i, k));
    double denom = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) denom += std::exp(sim(i, k) - mx);
    const double lse = mx + std::log(denom);
    const double inv = 1.0 / static_cast<double>(pos.size());
    double li = 0.0;
    for (Eigen::Index p : pos) li -= (sim(i, p) - lse) * inv;
    total += li;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) coeff(i, k) = std::exp(sim(i, k) - lse);
    for (Eigen::Index p : pos) coeff(i, p) -= inv;
  }
  LossResult out;
  out.gradient = Matrix::Zero(n, z.cols());
  if (anchors == 0) return out;
  const double scale = 1.0 / static_cast<double>(anchors);
  out.value = total * scale;
  coeff *= scale / tau;
  out.gradient = (coeff + coeff.transpose()) * z;
  return out;
}

}  // namespace

EmbeddingBatch EmbeddingBatch::normalized(const Matrix& raw, std::vector<int> labels, std::vector<int> view_pair) {
  return {normalize_rows(raw).normalized, std::move(labels), std::move(view_pair)};
}

double LossConfig::weight(const std::string& part) const {
  auto it = weights.find(part);
  return it == weights.end() ? 0.0 : it->second;
}

void LossConfig::validate() const {
  check_tau(temperature);
  static const std::set<std::string> known{kLossSupcon, kLossEtf, kLossRotation, kLossCrossEntropy, kLossSelfsup};
  bool any = false;
  for (const auto& [name, w] : weights) {
    if (!known.count(name)) fail(ErrorCode::config, "unknown loss weight '" + name + "'");
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::config, "loss weight '" + name + "' must be non-negative");
    any = any || w > 0.0;
  }
  if (!any) fail(ErrorCode::config, "at least one loss weight must be positive");
}

LossResult supcon_loss(const EmbeddingBatch& batch, double tau) {
  check_tau(tau);
  const Eigen::Index n = batch.size();
  if (n == 0) fail(ErrorCode::empty_input, "supcon needs a non-empty batch");
  if (static_cast<Eigen::Index>(batch.labels.size()) != n)
    fail(ErrorCode::dimension_mismatch, "supcon needs one label per row");
  std::vector<std::vector<Eigen::Index>> positives(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && batch.labels[i] == batch.labels[j]) positives[i].push_back(j);
  return contrastive(batch.embeddings, positives, tau);
}

LossResult selfsup_contrastive_loss(const EmbeddingBatch& batch, double tau) {
  check_tau(tau);
  const Eigen::Index n = batch.size();
  if (n == 0) fail(ErrorCode::empty_input, "contrastive loss needs a non-empty batch");
  if (static_cast<Eigen::Index>(batch.view_pair.size()) != n)
    fail(ErrorCode::invalid_pairing, "every row needs a paired view");
  std::vector<std::vector<Eigen::Index>> positives(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = batch.view_pair[i];
    if (k < 0 || k >= n || k == i || batch.view_pair[k] != i)
      fail(ErrorCode::invalid_pairing, "view pairing must be an involution without fixed points (row " +
                                           std::to_string(i) + ")");
    positives[i].push_back(k);
  }
  return contrastive(batch.embeddings, positives, tau);
}

LossResult etf_alignment_loss(std::span<const Prototype> learned, const EtfAssignment& assignment,
                              const EtfFrame& frame) {
  if (learned.empty()) fail(ErrorCode::empty_input, "no prototypes to align");
  const double n = static_cast<double>(learned.size());
  LossResult out;
  out.gradient = Matrix::Zero(static_cast<Eigen::Index>(learned.size()), frame.dim());
  for (std::size_t i = 0; i < learned.size(); ++i) {
    auto it = assignment.find(learned[i].class_id);
    if (it == assignment.end())
      fail(ErrorCode::missing_assignment, "class " + std::to_string(learned[i].class_id) + " has no frame vector");
    if (it->second < 0 || it->second >= frame.count()) fail(ErrorCode::out_of_range, "frame row out of range");
    if (learned[i].vector.size() != frame.dim())
      fail(ErrorCode::dimension_mismatch, "prototype dimension differs from frame");
    const Vector diff = frame.vectors.row(it->second).transpose() - learned[i].vector;
    out.value += diff.squaredNorm() / n;
    out.gradient.row(static_cast<Eigen::Index>(i)) = (-2.0 / n) * diff.transpose();
  }
  return out;
}

LossResult cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  if (n == 0) fail(ErrorCode::empty_input, "cross-entropy needs a non-empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    fail(ErrorCode::dimension_mismatch, "cross-entropy needs one label per row");
  LossResult out;
  out.gradient.resize(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      fail(ErrorCode::invalid_label, "label " + std::to_string(y) + " outside [0, " + std::to_string(logits.cols()) + ")");
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
    const double sum = e.sum();
    out.value += (mx + std::log(sum) - logits(i, y)) / static_cast<double>(n);
    out.gradient.row(i) = e / sum;
    out.gradient(i, y) -= 1.0;
  }
  out.gradient /= static_cast<double>(n);
  return out;
}

LossResult rotation_loss(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols() != 4) fail(ErrorCode::dimension_mismatch, "rotation logits must have four columns");
  for (int r : labels)
    if (r < 0 || r > 3) fail(ErrorCode::invalid_label, "rotation label " + std::to_string(r) + " outside {0,1,2,3}");
  return cross_entropy_loss(logits, labels);
}

LossResult composite_loss(const std::map<std::string, LossResult>& parts, const LossConfig& config) {
  LossResult out;
  bool shaped = false;
  for (const auto& [name, w] : config.weights) {
    if (w == 0.0) continue;
    auto it = parts.find(name);
    if (it == parts.end()) fail(ErrorCode::invalid_argument, "loss part '" + name + "' has weight but was not computed");
    const auto& g = it->second.gradient;
    if (!shaped) {
      out.gradient = Matrix::Zero(g.rows(), g.cols());
      shaped = true;
    } else if (g.rows() != out.gradient.rows() || g.cols() != out.gradient.cols()) {
      fail(ErrorCode::dimension_mismatch, "loss part '" + name + "' gradient shape differs");
    }
    out.value += w * it->second.value;
    out.gradient += w * g;
  }
  if (!shaped) fail(ErrorCode::config, "composite loss has no weighted parts");
  return out;
}

RowNormalization normalize_rows(const Matrix& raw) {
  RowNormalization out;
  out.norms = raw.rowwise().norm();
  out.normalized = raw;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double n = out.norms[i];
    if (n > 0) out.normalized.row(i) /= n;
  }
  return out;
}

Matrix normalize_rows_backward(const RowNormalization& forward, const Matrix& grad_normalized) {
  Matrix g(grad_normalized.rows(), grad_normalized.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double n = forward.norms[i];
    if (n <= 0) {
      g.row(i).setZero();
      continue;
    }
    const auto z = forward.normalized.row(i);
    const double proj = z.dot(grad_normalized.row(i));
    g.row(i) = (grad_normalized.row(i) - proj * z) / n;
  }
  return g;
}

}  // namespace fscil
