#include "fscil/pipeline.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "fscil/augment.hpp"
#include "fscil/error.hpp"
#include "fscil/losses.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

void emit(const LogSink& sink, const std::string& line) {
  if (sink) sink(line);
}

std::vector<Image> images_of(std::span<const LabeledSample> samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

std::vector<int> labels_of(std::span<const LabeledSample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<Prototype> prototypes_of(const Encoder& encoder, std::span<const LabeledSample> samples) {
  const auto images = images_of(samples);
  const auto labels = labels_of(samples);
  return class_prototypes(encoder.embed(images), labels);
}

PseudoClassScheme scheme_for(const ExperimentConfig& config) {
  if (config.tricks.pseudo) return pseudo_scheme(config);
  PseudoClassScheme s;
  s.multiplier = 1;
  s.base_classes = config.stream.base_classes;
  return s;
}

// Forward pass of row images; returns (rows x d) doubles.
Matrix forward_rows(const Architecture& arch, const ParameterSet& params, const std::vector<Image>& images,
                    ForwardCache& cache) {
  const Tensor x = pack_images(images, arch.input);
  return forward(arch, params, x, static_cast<int>(images.size()), &cache).transpose().cast<double>();
}

ParameterSet backward_rows(const Architecture& arch, const ParameterSet& params, const ForwardCache& cache,
                           const Matrix& grad_rows) {
  return backward(arch, params, cache, grad_rows.transpose().cast<float>());
}

void scale(ParameterSet& p, double factor) {
  if (factor == 1.0) return;
  for (auto& e : p.entries) e.value *= static_cast<float>(factor);
}

void check_finite(double loss, const char* stage) {
  if (!std::isfinite(loss)) fail(ErrorCode::divergence, std::string("non-finite loss during ") + stage);
}

std::string format_loss(const char* stage, int epoch, double loss) {
  std::ostringstream out;
  out << stage << " epoch " << epoch << " loss " << loss;
  return out.str();
}

}  // namespace

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::pretrain: return "pretrain";
    case Stage::base: return "base";
    case Stage::incremental: return "incremental";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "pretrain") return Stage::pretrain;
  if (name == "base") return Stage::base;
  if (name == "incremental") return Stage::incremental;
  fail(ErrorCode::invalid_argument, "unknown stage '" + name + "'");
}

StreamParams stream_params(const ExperimentConfig& config) {
  StreamParams p;
  p.base_classes = config.stream.base_classes;
  p.ways = config.stream.ways;
  p.shots = config.stream.shots;
  p.sessions = config.stream.sessions;
  p.shuffle_classes = config.stream.shuffle_classes;
  p.seed = derive_seed(config.seed, "stream");
  return p;
}

Encoder make_encoder(const ExperimentConfig& config, const TaskStream& stream) {
  if (stream.train_sets.empty() || stream.train_sets.front().empty())
    fail(ErrorCode::data, "base session has no training data");
  const Image& first = stream.train_sets.front().front().image;
  Encoder e;
  e.arch = build_architecture(config, {first.channels, first.height, first.width});
  e.params = init_parameters(e.arch, derive_seed(config.seed, "encoder"));
  return e;
}

Encoder run_pretraining(const ExperimentConfig& config, const TaskStream& stream, Encoder encoder,
                        TrainingLog* log, const LogSink& sink) {
  if (!config.tricks.pretraining) return encoder;
  const auto& data = stream.train_sets.at(0);
  const auto& stage = config.pretrain;
  Sgd sgd({stage.momentum, stage.weight_decay});
  Rng order(derive_seed(config.seed, "pretrain-order"));
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < stage.epochs; ++epoch) {
    const double lr = cosine_lr(stage.lr, epoch, stage.epochs);
    double total = 0.0;
    int batches = 0;
    for (const auto& idx : epoch_batches(data.size(), stage.batch_size, order)) {
      Rng rng(derive_seed(config.seed, "pretrain-step", step++));
      const int b = static_cast<int>(idx.size());
      if (b < 2) continue;  // a lone sample has no negatives
      std::vector<Image> first, second;
      for (auto i : idx) {
        first.push_back(augment_view(data[i].image, rng, config.augment));
        second.push_back(augment_view(data[i].image, rng, config.augment));
      }
      std::vector<Image> images = std::move(first);
      images.insert(images.end(), second.begin(), second.end());
      std::vector<int> pair(2 * static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        pair[static_cast<std::size_t>(i)] = i + b;
        pair[static_cast<std::size_t>(i + b)] = i;
      }
      ForwardCache cache;
      const Matrix raw = forward_rows(encoder.arch, encoder.params, images, cache);
      const RowNormalization norm = normalize_rows(raw);
      EmbeddingBatch eb{norm.normalized, std::vector<int>(images.size(), 0), pair};
      LossResult part = selfsup_contrastive_loss(eb, stage.loss.temperature);
      part.gradient = normalize_rows_backward(norm, part.gradient);
      const LossResult loss = composite_loss({{kLossSelfsup, part}}, stage.loss);
      check_finite(loss.value, "pretraining");
      sgd.step(encoder.params, backward_rows(encoder.arch, encoder.params, cache, loss.gradient), lr);
      total += loss.value;
      ++batches;
    }
    const double mean = batches ? total / batches : 0.0;
    if (log) log->epoch_loss.push_back(mean);
    emit(sink, format_loss("pretrain", epoch, mean));
  }
  return encoder;
}

LossConfig effective_base_loss(const ExperimentConfig& config, bool etf_active) {
  const auto& t = config.tricks;
  const auto& base = config.base.loss;
  LossConfig l;
  l.temperature = base.temperature;
  const double ce = base.weight(kLossCrossEntropy);
  if (t.supcon) {
    l.weights[kLossSupcon] = base.weight(kLossSupcon);
    if (ce > 0) l.weights[kLossCrossEntropy] = ce;
  } else {
    l.weights[kLossCrossEntropy] = ce > 0 ? ce : 1.0;
  }
  if (t.etf && etf_active && base.weight(kLossEtf) > 0) l.weights[kLossEtf] = base.weight(kLossEtf);
  if (t.rotation && base.weight(kLossRotation) > 0) l.weights[kLossRotation] = base.weight(kLossRotation);
  l.validate();
  return l;
}

LossConfig effective_incremental_loss(const ExperimentConfig& config) {
  const auto& inc = config.incremental.loss;
  LossConfig l;
  l.temperature = inc.temperature;
  if (config.tricks.supcon && inc.weight(kLossSupcon) > 0) l.weights[kLossSupcon] = inc.weight(kLossSupcon);
  const double ce = inc.weight(kLossCrossEntropy);
  if (ce > 0 || l.weights.empty()) l.weights[kLossCrossEntropy] = ce > 0 ? ce : 1.0;
  l.validate();
  return l;
}

BaseStepResult base_step(const ExperimentConfig& config, const BaseObjectiveState& state, const Architecture& arch,
                         const ParameterSet& params, std::span<const LabeledSample> batch, std::uint64_t step_seed,
                         ParameterSet& grads) {
  const LossConfig weights = effective_base_loss(config, state.frame.has_value());
  const PseudoClassScheme scheme = scheme_for(config);
  std::map<int, int> index;
  for (std::size_t i = 0; i < state.base_class_ids.size(); ++i) index[state.base_class_ids[i]] = static_cast<int>(i);

  const int views = weights.weight(kLossSupcon) > 0 ? 2 : 1;
  Rng rng(step_seed);
  std::vector<Image> images;
  std::vector<int> labels;      // training label per view row
  std::vector<int> real_class;  // dataset class id, -1 for pseudo rows
  std::vector<std::size_t> originals;
  for (const auto& s : batch) {
    auto it = index.find(s.label);
    if (it == index.end()) fail(ErrorCode::invalid_label, "sample label is not a base class");
    for (int m = 0; m < scheme.multiplier; ++m) {
      const Image source = m == 0 ? s.image : apply_pseudo_transform(scheme, s.image, m);
      const int label = pseudo_label(scheme, it->second, m);
      for (int v = 0; v < views; ++v) {
        if (m == 0 && v == 0) originals.push_back(images.size());
        images.push_back(augment_view(source, rng, config.augment));
        labels.push_back(label);
        real_class.push_back(m == 0 ? s.label : -1);
      }
    }
  }
  const auto view_rows = static_cast<Eigen::Index>(images.size());
  std::vector<int> rotation_labels;
  if (weights.weight(kLossRotation) > 0) {
    for (auto row : originals) {
      RotationExample ex = make_rotation_example(images[row], rng);
      images.push_back(std::move(ex.image));
      rotation_labels.push_back(ex.label);
    }
  }

  ForwardCache cache;
  const Matrix raw = forward_rows(arch, params, images, cache);
  const Matrix view_raw = raw.topRows(view_rows);
  auto full_rows = [&](const Matrix& top, Eigen::Index offset) {
    Matrix g = Matrix::Zero(raw.rows(), raw.cols());
    g.middleRows(offset, top.rows()) = top;
    return g;
  };

  BaseStepResult out;
  out.class_head_grads = state.class_head.params.zeros_like();
  out.rotation_head_grads = state.rotation_head.params.zeros_like();
  std::map<std::string, LossResult> parts;
  const RowNormalization norm = normalize_rows(view_raw);

  if (weights.weight(kLossSupcon) > 0) {
    LossResult part = supcon_loss(EmbeddingBatch{norm.normalized, labels, {}}, weights.temperature);
    part.gradient = full_rows(normalize_rows_backward(norm, part.gradient), 0);
    parts[kLossSupcon] = std::move(part);
  }
  if (weights.weight(kLossCrossEntropy) > 0) {
    LossResult part = cross_entropy_loss(state.class_head.forward(view_raw), labels);
    const Matrix dx = state.class_head.backward(view_raw, part.gradient, out.class_head_grads);
    scale(out.class_head_grads, weights.weight(kLossCrossEntropy));
    part.gradient = full_rows(dx, 0);
    parts[kLossCrossEntropy] = std::move(part);
  }
  if (weights.weight(kLossEtf) > 0) {
    // Batch prototypes of real classes from normalized view embeddings.
    std::map<int, std::vector<Eigen::Index>> rows_of;
    for (Eigen::Index r = 0; r < view_rows; ++r)
      if (real_class[static_cast<std::size_t>(r)] >= 0) rows_of[real_class[static_cast<std::size_t>(r)]].push_back(r);
    std::vector<Prototype> learned;
    for (const auto& [c, rows] : rows_of) {
      Vector mean = Vector::Zero(norm.normalized.cols());
      for (auto r : rows) mean += norm.normalized.row(r).transpose();
      learned.push_back({c, mean / static_cast<double>(rows.size()), static_cast<int>(rows.size())});
    }
    LossResult part = etf_alignment_loss(learned, state.assignment, *state.frame);
    Matrix dz = Matrix::Zero(view_rows, raw.cols());
    std::size_t k = 0;
    for (const auto& [c, rows] : rows_of) {
      for (auto r : rows) dz.row(r) = part.gradient.row(static_cast<Eigen::Index>(k)) / static_cast<double>(rows.size());
      ++k;
    }
    part.gradient = full_rows(normalize_rows_backward(norm, dz), 0);
    parts[kLossEtf] = std::move(part);
  }
  if (weights.weight(kLossRotation) > 0) {
    const Matrix rot_raw = raw.bottomRows(static_cast<Eigen::Index>(rotation_labels.size()));
    LossResult part = rotation_loss(state.rotation_head.forward(rot_raw), rotation_labels);
    const Matrix dx = state.rotation_head.backward(rot_raw, part.gradient, out.rotation_head_grads);
    scale(out.rotation_head_grads, weights.weight(kLossRotation));
    part.gradient = full_rows(dx, view_rows);
    parts[kLossRotation] = std::move(part);
  }

  const LossResult total = composite_loss(parts, weights);
  check_finite(total.value, "base training");
  grads = backward_rows(arch, params, cache, total.gradient);
  out.loss = total.value;
  return out;
}

BatchObjective base_objective(const ExperimentConfig& config, const BaseObjectiveState& state,
                              const Architecture& arch) {
  return [config, state, arch](const ParameterSet& params, std::span<const LabeledSample> batch,
                               std::uint64_t step_seed, ParameterSet& grads) {
    return base_step(config, state, arch, params, batch, step_seed, grads).loss;
  };
}

BaseSessionOutcome run_base_session(const ExperimentConfig& config, const TaskStream& stream, Encoder encoder,
                                    const LogSink& sink) {
  const auto& data = stream.train_sets.at(0);
  const std::vector<int> ids = stream.base_classes();
  const int base_count = static_cast<int>(ids.size());
  const int d = encoder.arch.embedding_dim();
  if (config.tricks.etf && base_count > d + 1)
    fail(ErrorCode::dimension_too_small, "no simplex ETF of " + std::to_string(base_count) +
                                             " vectors exists in dimension " + std::to_string(d));
  const PseudoClassScheme scheme = scheme_for(config);

  BaseSessionOutcome out;
  out.training_label_space = base_count * scheme.multiplier;
  auto& state = out.objective;
  state.base_class_ids = ids;
  state.class_head = LinearHead::make(d, out.training_label_space, derive_seed(config.seed, "class-head"));
  state.rotation_head = LinearHead::make(d, 4, derive_seed(config.seed, "rotation-head"));

  const auto& stage = config.base;
  const int etf_epoch = static_cast<int>(std::ceil(config.etf_epoch_factor * stage.epochs - 1e-9));
  Sgd encoder_sgd({stage.momentum, stage.weight_decay});
  Sgd class_sgd({stage.momentum, stage.weight_decay});
  Sgd rotation_sgd({stage.momentum, stage.weight_decay});
  Rng order(derive_seed(config.seed, "base-order"));
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < stage.epochs; ++epoch) {
    if (config.tricks.etf && !state.frame && epoch >= etf_epoch) {
      const auto current = prototypes_of(encoder, data);
      state.frame = make_etf_frame(base_count, d, derive_seed(config.seed, "etf"));
      state.assignment = assign_etf_prototypes(*state.frame, current);
      out.log.etf_assignment_epoch = epoch;
      out.log.events.push_back("etf-assigned epoch " + std::to_string(epoch));
      emit(sink, "base: ETF frame assigned at epoch " + std::to_string(epoch));
    }
    const double lr = cosine_lr(stage.lr, epoch, stage.epochs);
    double total = 0.0;
    int batches = 0;
    for (const auto& idx : epoch_batches(data.size(), stage.batch_size, order)) {
      const auto batch = gather(data, idx);
      ParameterSet grads;
      const BaseStepResult r = base_step(config, state, encoder.arch, encoder.params, batch,
                                         derive_seed(config.seed, "base-step", step++), grads);
      encoder_sgd.step(encoder.params, grads, lr);
      class_sgd.step(state.class_head.params, r.class_head_grads, lr);
      rotation_sgd.step(state.rotation_head.params, r.rotation_head_grads, lr);
      total += r.loss;
      ++batches;
    }
    const double mean = batches ? total / batches : 0.0;
    out.log.epoch_loss.push_back(mean);
    emit(sink, format_loss("base", epoch, mean));
  }

  out.prototypes = prototypes_of(encoder, data);
  out.classifier = PrototypeClassifier(out.prototypes);
  out.encoder = std::move(encoder);
  return out;
}

SessionRecord evaluate_state(const ExperimentConfig& config, const RunState& state, const TaskStream& stream,
                             int session_index) {
  const auto& test = cumulative_test_set(stream, session_index);
  const Matrix test_embeddings = state.encoder.embed(images_of(test));
  const auto test_labels = labels_of(test);
  SessionRecord rec;
  rec.result = evaluate_session(state.classifier, test_embeddings, test_labels, state.base_class_ids, session_index);
  if (config.geometry_split == "train") {
    std::vector<LabeledSample> seen;
    for (int t = 0; t <= session_index; ++t)
      seen.insert(seen.end(), stream.train_sets[static_cast<std::size_t>(t)].begin(),
                  stream.train_sets[static_cast<std::size_t>(t)].end());
    rec.geometry = geometry_report(state.encoder.embed(images_of(seen)), labels_of(seen), state.base_class_ids);
  } else {
    rec.geometry = geometry_report(test_embeddings, test_labels, state.base_class_ids);
  }
  return rec;
}

RunState start_run(const ExperimentConfig& config, const TaskStream& stream, const LogSink& sink) {
  config.validate();
  validate_stream(stream);
  RunState state;
  state.stage = Stage::pretrain;
  Encoder encoder = make_encoder(config, stream);
  if (config.tricks.pretraining) {
    encoder = run_pretraining(config, stream, std::move(encoder), &state.pretrain_log, sink);
  } else {
    emit(sink, "pretrain: skipped (toggle off)");
  }

  state.stage = Stage::base;
  BaseSessionOutcome base = run_base_session(config, stream, std::move(encoder), sink);
  state.encoder = std::move(base.encoder);
  state.classifier = std::move(base.classifier);
  state.base_class_ids = stream.base_classes();
  state.base_log = std::move(base.log);
  if (config.tricks.subnet_tuning) {
    state.mask = extract_subnet_mask(state.encoder, stream.train_sets.at(0),
                                     base_objective(config, base.objective, state.encoder.arch),
                                     mask_search_config(config));
    emit(sink, "base: subnet mask keeps " + std::to_string(state.mask->count_ones()) + " of " +
                   std::to_string(state.mask->size()) + " parameters");
  }
  state.session_index = 0;
  state.results.push_back(evaluate_state(config, state, stream, 0));
  emit(sink, "session 0: accuracy " + std::to_string(state.results.back().result.total_accuracy));
  return state;
}

namespace {

// Supervised contrastive loss plus cosine-prototype cross-entropy against every
// class seen so far; the prototypes stay fixed during tuning.
BatchObjective incremental_objective(const ExperimentConfig& config, const Architecture& arch,
                                     const std::vector<Prototype>& prototypes) {
  const LossConfig weights = effective_incremental_loss(config);
  Matrix table(static_cast<Eigen::Index>(prototypes.size()), prototypes.front().vector.size());
  std::map<int, int> row_of;
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    table.row(static_cast<Eigen::Index>(i)) = prototypes[i].vector.normalized().transpose();
    row_of[prototypes[i].class_id] = static_cast<int>(i);
  }
  const ViewConfig augment = config.augment;
  return [weights, table, row_of, augment, arch](const ParameterSet& params, std::span<const LabeledSample> batch,
                                                std::uint64_t step_seed, ParameterSet& grads) {
    const int views = weights.weight(kLossSupcon) > 0 ? 2 : 1;
    Rng rng(step_seed);
    std::vector<Image> images;
    std::vector<int> labels, targets;
    for (const auto& s : batch) {
      auto it = row_of.find(s.label);
      if (it == row_of.end()) fail(ErrorCode::invalid_label, "session sample has no prototype");
      for (int v = 0; v < views; ++v) {
        images.push_back(augment_view(s.image, rng, augment));
        labels.push_back(s.label);
        targets.push_back(it->second);
      }
    }
    ForwardCache cache;
    const Matrix raw = forward_rows(arch, params, images, cache);
    const RowNormalization norm = normalize_rows(raw);
    std::map<std::string, LossResult> parts;
    if (weights.weight(kLossSupcon) > 0)
      parts[kLossSupcon] = supcon_loss(EmbeddingBatch{norm.normalized, labels, {}}, weights.temperature);
    if (weights.weight(kLossCrossEntropy) > 0) {
      const double inv_tau = 1.0 / weights.temperature;
      LossResult part = cross_entropy_loss(norm.normalized * table.transpose() * inv_tau, targets);
      part.gradient = part.gradient * table * inv_tau;
      parts[kLossCrossEntropy] = std::move(part);
    }
    const LossResult total = composite_loss(parts, weights);
    grads = backward_rows(arch, params, cache, normalize_rows_backward(norm, total.gradient));
    return total.value;
  };
}

}  // namespace

RunState run_incremental_session(const ExperimentConfig& config, RunState state, const TaskStream& stream,
                                 const LogSink& sink) {
  const int t = state.session_index + 1;
  if (state.session_index < 0) fail(ErrorCode::invalid_argument, "base session has not run");
  if (t >= stream.session_count()) fail(ErrorCode::out_of_range, "no session " + std::to_string(t) + " in stream");
  const auto& data = stream.train_sets[static_cast<std::size_t>(t)];
  for (const auto& s : data)
    if (state.classifier.covers(s.label))
      fail(ErrorCode::label_overlap, "session " + std::to_string(t) + " repeats seen class " + std::to_string(s.label));

  if (config.tricks.subnet_tuning) {
    if (!state.mask) fail(ErrorCode::invalid_argument, "subnet tuning needs an extracted mask");
    std::vector<Prototype> all = state.classifier.prototypes();
    for (auto& p : prototypes_of(state.encoder, data)) all.push_back(std::move(p));
    incremental_tune(state.encoder, *state.mask, tuning_policy(config), data,
                     incremental_objective(config, state.encoder.arch, all),
                     derive_seed(config.seed, "incremental", static_cast<std::uint64_t>(t)));
  }
  state.classifier = state.classifier.expand(prototypes_of(state.encoder, data));
  state.stage = Stage::incremental;
  state.session_index = t;
  state.results.push_back(evaluate_state(config, state, stream, t));
  emit(sink, "session " + std::to_string(t) + ": accuracy " +
                 std::to_string(state.results.back().result.total_accuracy));
  return state;
}

namespace {

RunState continue_run(const ExperimentConfig& config, const TaskStream& stream, RunState state,
                      const RunOptions& options) {
  while (state.session_index + 1 < stream.session_count() &&
         (options.stop_after_session < 0 || state.session_index < options.stop_after_session)) {
    state = run_incremental_session(config, std::move(state), stream, options.sink);
    if (options.checkpoint_dir) write_checkpoint(*options.checkpoint_dir, config, state);
  }
  return state;
}

}  // namespace

RunState run_pipeline(const ExperimentConfig& config, const TaskStream& stream, const RunOptions& options) {
  RunState state = start_run(config, stream, options.sink);
  if (options.checkpoint_dir) write_checkpoint(*options.checkpoint_dir, config, state);
  return continue_run(config, stream, std::move(state), options);
}

RunState resume_pipeline(const ExperimentConfig& config, const TaskStream& stream, const RunOptions& options) {
  if (!options.checkpoint_dir) fail(ErrorCode::invalid_argument, "resume needs a checkpoint directory");
  const auto latest = latest_checkpoint(*options.checkpoint_dir);
  if (!latest) fail(ErrorCode::corrupt_checkpoint, "no checkpoint under " + options.checkpoint_dir->string());
  RunState state = read_checkpoint(*latest, config);
  if (state.session_index >= stream.session_count())
    fail(ErrorCode::corrupt_checkpoint, "checkpoint is past the end of the stream");
  emit(options.sink, "resumed after session " + std::to_string(state.session_index));
  return continue_run(config, stream, std::move(state), options);
}

double AblationCell::mean_final_accuracy() const {
  if (final_accuracy.empty()) return 0.0;
  return std::accumulate(final_accuracy.begin(), final_accuracy.end(), 0.0) /
         static_cast<double>(final_accuracy.size());
}

std::vector<TrickToggles> ablation_grid_toggles() {
  std::vector<TrickToggles> out;
  for (int code = 0; code < 8; ++code)
    out.push_back(TrickToggles::groups(code & 4, code & 2, code & 1));
  return out;
}

std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& config, const Dataset& dataset,
                                            std::span<const TrickToggles> subsets,
                                            std::span<const std::uint64_t> seeds, const LogSink& sink) {
  if (seeds.empty()) fail(ErrorCode::invalid_argument, "ablation needs at least one seed");
  std::vector<AblationCell> cells;
  for (const auto& toggles : subsets) {
    AblationCell cell;
    cell.toggles = toggles;
    for (auto seed : seeds) {
      ExperimentConfig cfg = config;
      cfg.tricks = toggles;
      cfg.seed = seed;
      const TaskStream stream = build_task_stream(dataset, stream_params(cfg));
      emit(sink, "ablation cell " + toggles.label() + " seed " + std::to_string(seed));
      const RunState state = run_pipeline(cfg, stream);
      const auto& last = state.results.back().result;
      cell.seeds.push_back(seed);
      cell.final_accuracy.push_back(last.total_accuracy);
      cell.final_base_accuracy.push_back(last.base_accuracy);
      cell.final_novel_accuracy.push_back(last.novel_accuracy.value_or(0.0));
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace fscil
