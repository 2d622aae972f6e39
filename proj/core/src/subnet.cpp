#include "fscil/subnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

using nlohmann::json;

std::size_t SubnetMask::size() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.bits.size();
  return n;
}

std::size_t SubnetMask::count_ones() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += static_cast<std::size_t>(std::count(e.bits.begin(), e.bits.end(), 1));
  return n;
}

bool SubnetMask::matches(const ParameterSet& params) const {
  if (entries.size() != params.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = params.entries[i];
    if (entries[i].name != p.name || entries[i].rows != p.value.rows() || entries[i].cols != p.value.cols())
      return false;
  }
  return true;
}

ParameterSet SubnetMask::as_parameters() const {
  ParameterSet out;
  for (const auto& e : entries) {
    Tensor t(e.rows, e.cols);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = e.bits[static_cast<std::size_t>(k)] ? 1.0f : 0.0f;
    out.entries.push_back({e.name, std::move(t)});
  }
  return out;
}

SubnetMask SubnetMask::full(const ParameterSet& params) {
  SubnetMask m;
  for (const auto& p : params.entries)
    m.entries.push_back({p.name, static_cast<int>(p.value.rows()), static_cast<int>(p.value.cols()),
                         std::vector<std::uint8_t>(static_cast<std::size_t>(p.value.size()), 1)});
  m.retain_fraction = 1.0;
  return m;
}

SubnetMask top_fraction_mask(const ParameterSet& scores, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::out_of_range, "retain fraction must be in (0, 1]");
  const std::size_t total = scores.parameter_count();
  std::vector<float> flat;
  flat.reserve(total);
  for (const auto& e : scores.entries) flat.insert(flat.end(), e.value.data(), e.value.data() + e.value.size());
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * total)), 1, total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) { return flat[a] > flat[b] || (flat[a] == flat[b] && a < b); };
  if (keep < total) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
  std::vector<std::uint8_t> bits(total, 0);
  for (std::size_t k = 0; k < keep; ++k) bits[order[k]] = 1;

  SubnetMask m;
  m.retain_fraction = fraction;
  std::size_t offset = 0;
  for (const auto& e : scores.entries) {
    const auto n = static_cast<std::size_t>(e.value.size());
    m.entries.push_back({e.name, static_cast<int>(e.value.rows()), static_cast<int>(e.value.cols()),
                         std::vector<std::uint8_t>(bits.begin() + static_cast<std::ptrdiff_t>(offset),
                                                   bits.begin() + static_cast<std::ptrdiff_t>(offset + n))});
    offset += n;
  }
  return m;
}

ParameterSet apply_mask(const ParameterSet& params, const SubnetMask& mask) {
  if (!mask.matches(params)) fail(ErrorCode::shape_mismatch, "mask layout differs from parameters");
  ParameterSet out = params;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    auto& v = out.entries[i].value;
    const auto& bits = mask.entries[i].bits;
    for (Eigen::Index k = 0; k < v.size(); ++k)
      if (!bits[static_cast<std::size_t>(k)]) v.data()[k] = 0.0f;
  }
  return out;
}

Matrix apply_mask_forward(const Encoder& encoder, const SubnetMask& mask, std::span<const Image> images) {
  return encoder.embed_with(apply_mask(encoder.params, mask), images);
}

void MaskSearchConfig::validate() const {
  if (!(retain_fraction > 0.0 && retain_fraction <= 1.0))
    fail(ErrorCode::out_of_range, "retain fraction must be in (0, 1]");
  if (steps < 0 || batch_size <= 0 || !(score_lr >= 0.0))
    fail(ErrorCode::invalid_argument, "mask search needs steps >= 0, batch size > 0, score lr >= 0");
}

SubnetMask extract_subnet_mask(const Encoder& encoder, std::span<const LabeledSample> base_data,
                               const BatchObjective& objective, const MaskSearchConfig& config) {
  config.validate();
  if (base_data.empty()) fail(ErrorCode::empty_input, "mask extraction needs base-session data");
  if (config.retain_fraction == 1.0) return SubnetMask::full(encoder.params);

  ParameterSet scores = encoder.params;
  for (auto& e : scores.entries) e.value = e.value.cwiseAbs();
  if (config.mode == MaskSearchMode::magnitude || config.steps == 0)
    return top_fraction_mask(scores, config.retain_fraction);

  Rng rng(derive_seed(config.seed, "mask-search"));
  std::vector<std::vector<std::size_t>> batches;
  std::size_t cursor = 0;
  for (int step = 0; step < config.steps; ++step) {
    if (cursor == batches.size()) {
      batches = epoch_batches(base_data.size(), config.batch_size, rng);
      cursor = 0;
    }
    const auto batch = gather(base_data, batches[cursor++]);
    const SubnetMask mask = top_fraction_mask(scores, config.retain_fraction);
    const ParameterSet effective = apply_mask(encoder.params, mask);
    ParameterSet grads = effective.zeros_like();
    const double loss = objective(effective, batch, derive_seed(config.seed, "mask-step", static_cast<std::uint64_t>(step)), grads);
    if (!std::isfinite(loss)) fail(ErrorCode::divergence, "non-finite loss during mask search");
    // Straight-through: d loss / d score = d loss / d m = d loss / d w_eff * theta.
    for (std::size_t i = 0; i < scores.entries.size(); ++i)
      scores.entries[i].value -= static_cast<float>(config.score_lr) *
                                 grads.entries[i].value.cwiseProduct(encoder.params.entries[i].value);
  }
  return top_fraction_mask(scores, config.retain_fraction);
}

double subnet_gap(const Encoder& encoder, const SubnetMask& mask, std::span<const LabeledSample> data,
                  const BatchObjective& objective, int batch_size, std::uint64_t seed) {
  if (data.empty()) fail(ErrorCode::empty_input, "gap needs data");
  const ParameterSet masked = apply_mask(encoder.params, mask);
  double gap = 0.0;
  std::uint64_t index = 0;
  for (std::size_t s = 0; s < data.size(); s += static_cast<std::size_t>(batch_size), ++index) {
    const auto batch = data.subspan(s, std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - s));
    const std::uint64_t step_seed = derive_seed(seed, "gap", index);
    ParameterSet g1 = masked.zeros_like(), g2 = masked.zeros_like();
    const double lm = objective(masked, batch, step_seed, g1);
    const double lf = objective(encoder.params, batch, step_seed, g2);
    gap += (lm - lf) * static_cast<double>(batch.size());
  }
  return gap / static_cast<double>(data.size());
}

void TuningPolicy::validate(const Architecture& arch) const {
  if (!(incremental_lr > 0.0)) fail(ErrorCode::config, "incremental learning rate must be positive");
  if (epochs_per_session < 0 || batch_size <= 0) fail(ErrorCode::config, "invalid tuning schedule");
  const auto names = arch.layer_names();
  for (const auto& prefix : frozen_layer_prefixes) {
    const bool hit = std::any_of(names.begin(), names.end(),
                                 [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
    if (!hit) fail(ErrorCode::unknown_layer, "frozen prefix '" + prefix + "' matches no encoder layer");
  }
}

ParameterSet trainable_parameters(const ParameterSet& params, const SubnetMask& mask, const TuningPolicy& policy) {
  if (!mask.matches(params)) fail(ErrorCode::shape_mismatch, "mask layout differs from parameters");
  ParameterSet out = params.zeros_like();
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    const std::string layer = layer_of(out.entries[i].name);
    const bool frozen_layer = std::any_of(policy.frozen_layer_prefixes.begin(), policy.frozen_layer_prefixes.end(),
                                          [&](const std::string& p) { return layer.rfind(p, 0) == 0; });
    if (frozen_layer) continue;
    auto& v = out.entries[i].value;
    const auto& bits = mask.entries[i].bits;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = bits[static_cast<std::size_t>(k)] ? 0.0f : 1.0f;
  }
  return out;
}

void incremental_tune(Encoder& encoder, const SubnetMask& mask, const TuningPolicy& policy,
                      std::span<const LabeledSample> session_data, const BatchObjective& objective,
                      std::uint64_t seed) {
  policy.validate(encoder.arch);
  const ParameterSet trainable = trainable_parameters(encoder.params, mask, policy);
  if (policy.epochs_per_session == 0 || session_data.empty()) return;
  Sgd sgd({policy.momentum, 0.0});
  Rng rng(derive_seed(seed, "incremental-order"));
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < policy.epochs_per_session; ++epoch) {
    for (const auto& idx : epoch_batches(session_data.size(), policy.batch_size, rng)) {
      const auto batch = gather(session_data, idx);
      ParameterSet grads = encoder.params.zeros_like();
      const double loss = objective(encoder.params, batch, derive_seed(seed, "incremental-step", step++), grads);
      if (!std::isfinite(loss)) fail(ErrorCode::divergence, "non-finite loss during incremental tuning");
      sgd.step(encoder.params, grads, policy.incremental_lr, &trainable);
    }
  }
}

namespace {

std::string to_hex(const std::vector<std::uint8_t>& bits) {
  static const char* digits = "0123456789abcdef";
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  std::string out;
  out.reserve(packed.size() * 2);
  for (auto b : packed) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex, std::size_t n) {
  if (hex.size() != (n + 7) / 8 * 2) fail(ErrorCode::corrupt_checkpoint, "mask bitset has wrong length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    fail(ErrorCode::corrupt_checkpoint, "bad hex digit in mask");
  };
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int byte = nibble(hex[(i / 8) * 2]) * 16 + nibble(hex[(i / 8) * 2 + 1]);
    bits[i] = static_cast<std::uint8_t>((byte >> (i % 8)) & 1);
  }
  return bits;
}

}  // namespace

void write_mask(const std::filesystem::path& path, const SubnetMask& mask) {
  json doc{{"format", "fscil-mask"}, {"version", 1}, {"retain_fraction", mask.retain_fraction}};
  doc["layers"] = json::array();
  for (const auto& e : mask.entries)
    doc["layers"].push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"bits", to_hex(e.bits)}});
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write mask " + path.string());
  out << doc.dump(1) << '\n';
}

SubnetMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::corrupt_checkpoint, "cannot read mask " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "fscil-mask") fail(ErrorCode::corrupt_checkpoint, "not a mask file");
    if (doc.at("version") != 1) fail(ErrorCode::version_mismatch, "unsupported mask version");
    SubnetMask m;
    m.retain_fraction = doc.at("retain_fraction").get<double>();
    for (const auto& l : doc.at("layers")) {
      LayerMask e;
      e.name = l.at("name").get<std::string>();
      e.rows = l.at("rows").get<int>();
      e.cols = l.at("cols").get<int>();
      e.bits = from_hex(l.at("bits").get<std::string>(), static_cast<std::size_t>(e.rows) * e.cols);
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::corrupt_checkpoint, "malformed mask " + path.string() + ": " + e.what());
  }
}

}  // namespace fscil
