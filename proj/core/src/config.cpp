#include "fscil/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

using nlohmann::json;

std::string TrickToggles::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(supcon, "supcon");
  add(etf, "etf");
  add(pseudo, "pseudo");
  add(subnet_tuning, "subnet");
  add(pretraining, "pretrain");
  add(rotation, "rotation");
  return out.empty() ? "baseline" : out;
}

ExperimentConfig::ExperimentConfig() {
  pretrain.epochs = 20;
  pretrain.lr = 0.05;
  pretrain.loss.weights = {{kLossSelfsup, 1.0}};
  base.epochs = 50;
  base.lr = 0.05;
  base.loss.weights = {{kLossSupcon, 1.0}, {kLossEtf, 1.0}, {kLossRotation, 0.5}, {kLossCrossEntropy, 0.0}};
  incremental.loss.weights = {{kLossSupcon, 1.0}, {kLossCrossEntropy, 1.0}};
}

double ExperimentConfig::incremental_lr() const { return incremental.lr.value_or(base.lr * 0.01); }

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::config, what);
  };
  need(dataset.kind == "toy" || dataset.kind == "manifest" || dataset.kind == "folder",
       "dataset.kind must be toy, manifest or folder");
  need(dataset.kind == "toy" || !dataset.path.empty(), "dataset.path is required for " + dataset.kind);
  need(stream.base_classes > 0 && stream.sessions >= 0, "stream sizes must be positive");
  need(stream.sessions == 0 || (stream.ways > 0 && stream.shots > 0), "stream.ways and stream.shots must be positive");
  need(encoder.architecture == "conv4", "encoder.architecture must be conv4");
  need(encoder.embedding_dim > 0, "encoder.embedding_dim must be positive");
  for (const StageConfig* s : {&pretrain, &base}) {
    need(s->epochs >= 0, "epochs must be >= 0");
    need(s->lr > 0 && s->batch_size > 0, "learning rate and batch size must be positive");
    need(s->momentum >= 0 && s->momentum < 1 && s->weight_decay >= 0, "invalid momentum or weight decay");
  }
  pretrain.loss.validate();
  base.loss.validate();
  incremental.loss.validate();
  need(incremental.epochs_per_session >= 0 && incremental.batch_size > 0, "invalid incremental schedule");
  need(incremental_lr() > 0, "incremental lr must be positive");
  need(incremental_lr() < base.lr, "incremental lr must be smaller than the base lr");
  need(etf_epoch_factor >= 0 && etf_epoch_factor < 1, "etf.epoch_factor must lie in [0, 1)");
  need(subnet.retain_fraction > 0 && subnet.retain_fraction <= 1, "subnet.retain_fraction must lie in (0, 1]");
  need(subnet.steps >= 0 && subnet.score_lr >= 0, "invalid subnet search schedule");
  need(subnet.mode == "scores" || subnet.mode == "magnitude", "subnet.mode must be scores or magnitude");
  need(pseudo.multiplier >= 1 && static_cast<int>(pseudo.transforms.size()) == pseudo.multiplier - 1,
       "pseudo.transforms must list multiplier-1 transforms");
  for (const auto& t : pseudo.transforms) parse_hard_transform(t);
  need(geometry_split == "test" || geometry_split == "train", "eval.geometry_split must be test or train");
  need(augment.crop_scale_min > 0 && augment.crop_scale_min <= 1, "augment.crop_scale_min must lie in (0, 1]");
}

namespace {

json loss_json(const LossConfig& l) {
  json w = json::object();
  for (const auto& [k, v] : l.weights) w[k] = v;
  return {{"temperature", l.temperature}, {"weights", w}};
}

json stage_json(const StageConfig& s) {
  return {{"epochs", s.epochs},           {"lr", s.lr},
          {"momentum", s.momentum},       {"weight_decay", s.weight_decay},
          {"batch_size", s.batch_size},   {"loss", loss_json(s.loss)}};
}

// Walks one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json* node, std::string path, const std::string& source)
      : node_(node), path_(std::move(path)), source_(source) {
    if (node_ && !node_->is_object()) error(path_.empty() ? "config root" : path_, "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      error(qualified(key), "has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T tmp{};
    try {
      tmp = v->get<T>();
    } catch (const json::exception&) {
      error(qualified(key), "has the wrong type");
    }
    out = tmp;
  }

  Reader child(const char* key) { return Reader(find(key), qualified(key), source_); }

  const json* find(const char* key) {
    if (!node_) return nullptr;
    auto it = node_->find(key);
    if (it == node_->end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void finish() const {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!used_.count(it.key())) error(qualified(it.key()), "is not a recognized key");
  }

  [[noreturn]] void error(const std::string& key, const std::string& what) const {
    std::string where;
    const auto leaf = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
    if (!source_.empty()) {
      const auto pos = source_.find("\"" + leaf + "\"");
      if (pos != std::string::npos) {
        const auto line = 1 + std::count(source_.begin(), source_.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
        where = " (line " + std::to_string(line) + ")";
      }
    }
    fail(ErrorCode::config, "'" + key + "' " + what + where);
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> used_;
};

void read_loss(Reader r, LossConfig& l) {
  r.get("temperature", l.temperature);
  if (const json* w = r.find("weights")) {
    if (!w->is_object()) r.error("weights", "expected an object");
    l.weights.clear();
    for (auto it = w->begin(); it != w->end(); ++it) {
      if (!it->is_number()) r.error("weights." + it.key(), "must be a number");
      l.weights[it.key()] = it->get<double>();
    }
  }
  r.finish();
}

void read_stage(Reader r, StageConfig& s) {
  r.get("epochs", s.epochs);
  r.get("lr", s.lr);
  r.get("momentum", s.momentum);
  r.get("weight_decay", s.weight_decay);
  r.get("batch_size", s.batch_size);
  read_loss(r.child("loss"), s.loss);
  r.finish();
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["dataset"] = {{"kind", dataset.kind},
                  {"path", dataset.path},
                  {"toy",
                   {{"classes", dataset.toy.classes},
                    {"train_per_class", dataset.toy.train_per_class},
                    {"test_per_class", dataset.toy.test_per_class},
                    {"image_size", dataset.toy.image_size},
                    {"strokes_per_class", dataset.toy.strokes_per_class},
                    {"shift", dataset.toy.shift},
                    {"wobble", dataset.toy.wobble},
                    {"noise", dataset.toy.noise},
                    {"clutter", dataset.toy.clutter},
                    {"seed", dataset.toy.seed}}}};
  j["stream"] = {{"base_classes", stream.base_classes},
                 {"ways", stream.ways},
                 {"shots", stream.shots},
                 {"sessions", stream.sessions},
                 {"shuffle_classes", stream.shuffle_classes}};
  j["encoder"] = {{"architecture", encoder.architecture},
                  {"channels", encoder.channels},
                  {"embedding_dim", encoder.embedding_dim}};
  j["pretrain"] = stage_json(pretrain);
  j["base"] = stage_json(base);
  j["incremental"] = {{"epochs_per_session", incremental.epochs_per_session},
                      {"lr", incremental.lr ? json(*incremental.lr) : json(nullptr)},
                      {"momentum", incremental.momentum},
                      {"batch_size", incremental.batch_size},
                      {"frozen_layer_prefixes", incremental.frozen_layer_prefixes},
                      {"loss", loss_json(incremental.loss)}};
  j["pseudo"] = {{"multiplier", pseudo.multiplier}, {"transforms", pseudo.transforms}};
  j["etf"] = {{"epoch_factor", etf_epoch_factor}};
  j["subnet"] = {{"retain_fraction", subnet.retain_fraction},
                 {"steps", subnet.steps},
                 {"score_lr", subnet.score_lr},
                 {"mode", subnet.mode}};
  j["augment"] = {{"enabled", augment.enabled},
                  {"crop_scale_min", augment.crop_scale_min},
                  {"hflip", augment.hflip},
                  {"brightness", augment.brightness},
                  {"contrast", augment.contrast}};
  j["tricks"] = {{"supcon", tricks.supcon},           {"etf", tricks.etf},
                 {"pseudo", tricks.pseudo},           {"subnet_tuning", tricks.subnet_tuning},
                 {"pretraining", tricks.pretraining}, {"rotation", tricks.rotation}};
  j["eval"] = {{"geometry_split", geometry_split}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::string& source) {
  ExperimentConfig c;
  Reader root(&doc, "", source);
  root.get("name", c.name);
  root.get("seed", c.seed);
  {
    Reader r = root.child("dataset");
    r.get("kind", c.dataset.kind);
    r.get("path", c.dataset.path);
    Reader t = r.child("toy");
    auto& toy = c.dataset.toy;
    t.get("classes", toy.classes);
    t.get("train_per_class", toy.train_per_class);
    t.get("test_per_class", toy.test_per_class);
    t.get("image_size", toy.image_size);
    t.get("strokes_per_class", toy.strokes_per_class);
    t.get("shift", toy.shift);
    t.get("wobble", toy.wobble);
    t.get("noise", toy.noise);
    t.get("clutter", toy.clutter);
    t.get("seed", toy.seed);
    t.finish();
    r.finish();
  }
  {
    Reader r = root.child("stream");
    r.get("base_classes", c.stream.base_classes);
    r.get("ways", c.stream.ways);
    r.get("shots", c.stream.shots);
    r.get("sessions", c.stream.sessions);
    r.get("shuffle_classes", c.stream.shuffle_classes);
    r.finish();
  }
  {
    Reader r = root.child("encoder");
    r.get("architecture", c.encoder.architecture);
    r.get("channels", c.encoder.channels);
    r.get("embedding_dim", c.encoder.embedding_dim);
    r.finish();
  }
  read_stage(root.child("pretrain"), c.pretrain);
  read_stage(root.child("base"), c.base);
  {
    Reader r = root.child("incremental");
    r.get("epochs_per_session", c.incremental.epochs_per_session);
    r.get("lr", c.incremental.lr);
    r.get("momentum", c.incremental.momentum);
    r.get("batch_size", c.incremental.batch_size);
    r.get("frozen_layer_prefixes", c.incremental.frozen_layer_prefixes);
    read_loss(r.child("loss"), c.incremental.loss);
    r.finish();
  }
  {
    Reader r = root.child("pseudo");
    r.get("multiplier", c.pseudo.multiplier);
    r.get("transforms", c.pseudo.transforms);
    r.finish();
  }
  {
    Reader r = root.child("etf");
    r.get("epoch_factor", c.etf_epoch_factor);
    r.finish();
  }
  {
    Reader r = root.child("subnet");
    r.get("retain_fraction", c.subnet.retain_fraction);
    r.get("steps", c.subnet.steps);
    r.get("score_lr", c.subnet.score_lr);
    r.get("mode", c.subnet.mode);
    r.finish();
  }
  {
    Reader r = root.child("augment");
    r.get("enabled", c.augment.enabled);
    r.get("crop_scale_min", c.augment.crop_scale_min);
    r.get("hflip", c.augment.hflip);
    r.get("brightness", c.augment.brightness);
    r.get("contrast", c.augment.contrast);
    r.finish();
  }
  {
    Reader r = root.child("tricks");
    r.get("supcon", c.tricks.supcon);
    r.get("etf", c.tricks.etf);
    r.get("pseudo", c.tricks.pseudo);
    r.get("subnet_tuning", c.tricks.subnet_tuning);
    r.get("pretraining", c.tricks.pretraining);
    r.get("rotation", c.tricks.rotation);
    r.finish();
  }
  {
    Reader r = root.child("eval");
    r.get("geometry_split", c.geometry_split);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorCode::config, "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) fail(ErrorCode::config, "override path '" + key + "' crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) fail(ErrorCode::config, "override path '" + key + "' crosses a non-object");
  (*node)[parts.back()] = std::move(value);
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": syntax error: " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return ExperimentConfig::from_json(doc, text);
  } catch (const Error& e) {
    fail(e.code(), origin + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig config = parse_config(buf.str(), overrides, path.string());
  // Dataset paths are relative to the config file.
  if (!config.dataset.path.empty() && std::filesystem::path(config.dataset.path).is_relative())
    config.dataset.path = std::filesystem::absolute(path.parent_path() / config.dataset.path).lexically_normal().string();
  return config;
}

Dataset load_dataset(const DatasetConfig& config) {
  if (config.kind == "toy") return make_toy_dataset(config.toy);
  if (config.kind == "manifest") return load_manifest(config.path);
  if (config.kind == "folder") return load_image_folder(config.path);
  fail(ErrorCode::config, "unknown dataset kind '" + config.kind + "'");
}

Architecture build_architecture(const ExperimentConfig& config, const ActivationShape& input) {
  if (input.height != input.width) fail(ErrorCode::data, "conv4 expects square images");
  return Architecture::conv4(input.channels, input.height, config.encoder.channels, config.encoder.embedding_dim);
}

TuningPolicy tuning_policy(const ExperimentConfig& config) {
  TuningPolicy p;
  p.frozen_layer_prefixes = config.incremental.frozen_layer_prefixes;
  p.incremental_lr = config.incremental_lr();
  p.epochs_per_session = config.incremental.epochs_per_session;
  p.batch_size = config.incremental.batch_size;
  p.momentum = config.incremental.momentum;
  return p;
}

MaskSearchConfig mask_search_config(const ExperimentConfig& config) {
  MaskSearchConfig m;
  m.retain_fraction = config.subnet.retain_fraction;
  m.steps = config.subnet.steps;
  m.score_lr = config.subnet.score_lr;
  m.batch_size = config.base.batch_size;
  m.seed = derive_seed(config.seed, "mask");
  m.mode = config.subnet.mode == "magnitude" ? MaskSearchMode::magnitude : MaskSearchMode::scores;
  return m;
}

PseudoClassScheme pseudo_scheme(const ExperimentConfig& config) {
  PseudoClassScheme s;
  s.multiplier = config.pseudo.multiplier;
  s.base_classes = config.stream.base_classes;
  for (const auto& t : config.pseudo.transforms) s.transforms.push_back(parse_hard_transform(t));
  s.validate();
  return s;
}

}  // namespace fscil
