#include "fscil/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

int Architecture::embedding_dim() const {
  const auto s = shapes();
  if (s.empty()) fail(ErrorCode::invalid_argument, "architecture has no layers");
  return s.back().features();
}

std::vector<ActivationShape> Architecture::shapes() const {
  std::vector<ActivationShape> out;
  ActivationShape cur = input;
  if (cur.channels <= 0 || cur.height <= 0 || cur.width <= 0)
    fail(ErrorCode::invalid_argument, "architecture input shape must be positive");
  for (const auto& layer : layers) {
    if (layer.out <= 0) fail(ErrorCode::invalid_argument, "layer " + layer.name + " needs a positive width");
    if (layer.kind == LayerSpec::Kind::conv3x3) {
      if (!out.empty() && layers[out.size() - 1].kind == LayerSpec::Kind::linear)
        fail(ErrorCode::invalid_argument, "conv layer " + layer.name + " cannot follow a linear layer");
      cur.channels = layer.out;
      if (layer.pool == Pool::max2) {
        if (cur.height % 2 || cur.width % 2)
          fail(ErrorCode::invalid_argument, "max pooling in " + layer.name + " needs even spatial size");
        cur.height /= 2;
        cur.width /= 2;
      } else if (layer.pool == Pool::global_avg) {
        cur.height = cur.width = 1;
      }
    } else {
      cur = ActivationShape{layer.out, 1, 1};
    }
    out.push_back(cur);
  }
  return out;
}

std::vector<std::string> Architecture::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers) names.push_back(l.name);
  return names;
}

Architecture Architecture::conv4(int in_channels, int image_size, std::vector<int> channels, int embedding_dim) {
  if (channels.size() != 4) fail(ErrorCode::config, "conv4 needs exactly four channel widths");
  Architecture a;
  a.input = {in_channels, image_size, image_size};
  for (int i = 0; i < 4; ++i) {
    LayerSpec l;
    l.name = "block" + std::to_string(i + 1);
    l.kind = LayerSpec::Kind::conv3x3;
    l.out = channels[static_cast<std::size_t>(i)];
    l.relu = true;
    l.pool = i < 3 ? Pool::max2 : Pool::global_avg;
    a.layers.push_back(l);
  }
  a.layers.push_back({"embed", LayerSpec::Kind::linear, embedding_dim, false, Pool::none, true});
  a.shapes();
  return a;
}

Architecture Architecture::mlp(ActivationShape input, std::vector<int> hidden, int out, bool bias) {
  Architecture a;
  a.input = input;
  for (std::size_t i = 0; i < hidden.size(); ++i)
    a.layers.push_back({"fc" + std::to_string(i + 1), LayerSpec::Kind::linear, hidden[i], true, Pool::none, bias});
  a.layers.push_back({"out", LayerSpec::Kind::linear, out, false, Pool::none, bias});
  a.shapes();
  return a;
}

Tensor& ParameterSet::at(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e.value;
  fail(ErrorCode::unknown_layer, "no parameter named " + name);
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.value;
  fail(ErrorCode::unknown_layer, "no parameter named " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return true;
  return false;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z;
  for (const auto& e : entries) z.entries.push_back({e.name, Tensor::Zero(e.value.rows(), e.value.cols())});
  return z;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& a = entries[i];
    const auto& b = other.entries[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
  }
  return true;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i].value;
    const auto& y = b.entries[i].value;
    if (std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(float)) != 0) return false;
  }
  return true;
}

std::string layer_of(const std::string& parameter_name) {
  const auto dot = parameter_name.rfind('.');
  return dot == std::string::npos ? parameter_name : parameter_name.substr(0, dot);
}

ParameterSet init_parameters(const Architecture& arch, std::uint64_t seed) {
  const auto shapes = arch.shapes();
  Rng rng(derive_seed(seed, "init"));
  ParameterSet params;
  ActivationShape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const int fan_in = l.kind == LayerSpec::Kind::conv3x3 ? in.channels * 9 : in.features();
    const double stddev = std::sqrt((l.relu ? 2.0 : 1.0) / fan_in);
    std::normal_distribution<double> gauss(0.0, stddev);
    Tensor w(l.out, fan_in);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<float>(gauss(rng));
    params.entries.push_back({l.name + ".weight", std::move(w)});
    if (l.bias) params.entries.push_back({l.name + ".bias", Tensor::Zero(l.out, 1)});
    in = shapes[i];
  }
  return params;
}

Tensor pack_images(std::span<const Image> images, const ActivationShape& shape) {
  const int hw = shape.height * shape.width;
  Tensor out(shape.channels, static_cast<Eigen::Index>(images.size()) * hw);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& img = images[b];
    if (img.height != shape.height || img.width != shape.width || img.channels != shape.channels)
      fail(ErrorCode::shape_mismatch, "image shape does not match the encoder input");
    for (int p = 0; p < hw; ++p)
      for (int c = 0; c < shape.channels; ++c)
        out(c, static_cast<Eigen::Index>(b) * hw + p) = img.pixels[static_cast<std::size_t>(p) * shape.channels + c];
  }
  return out;
}

namespace {

Tensor im2col(const Tensor& x, int batch, const ActivationShape& s) {
  const int H = s.height, W = s.width, C = s.channels;
  Tensor cols(C * 9, static_cast<Eigen::Index>(batch) * H * W);
  for (int b = 0; b < batch; ++b)
    for (int y = 0; y < H; ++y)
      for (int x0 = 0; x0 < W; ++x0) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * H + y) * W + x0;
        float* col = cols.col(n).data();
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x0 + kx - 1;
              const bool inside = yy >= 0 && yy < H && xx >= 0 && xx < W;
              col[c * 9 + ky * 3 + kx] =
                  inside ? x(c, (static_cast<Eigen::Index>(b) * H + yy) * W + xx) : 0.0f;
            }
          }
      }
  return cols;
}

void col2im(const Tensor& cols, int batch, const ActivationShape& s, Tensor& dx) {
  const int H = s.height, W = s.width, C = s.channels;
  dx.setZero(C, static_cast<Eigen::Index>(batch) * H * W);
  for (int b = 0; b < batch; ++b)
    for (int y = 0; y < H; ++y)
      for (int x0 = 0; x0 < W; ++x0) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * H + y) * W + x0;
        const float* col = cols.col(n).data();
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= H) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x0 + kx - 1;
              if (xx < 0 || xx >= W) continue;
              dx(c, (static_cast<Eigen::Index>(b) * H + yy) * W + xx) += col[c * 9 + ky * 3 + kx];
            }
          }
      }
}

// (C, B*HW) -> (C*HW, B)
Tensor flatten(const Tensor& x, int batch, const ActivationShape& s) {
  const int hw = s.height * s.width;
  if (hw == 1) return x;
  Tensor out(s.channels * hw, batch);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int p = 0; p < hw; ++p) out(c * hw + p, b) = x(c, static_cast<Eigen::Index>(b) * hw + p);
  return out;
}

Tensor unflatten(const Tensor& x, int batch, const ActivationShape& s) {
  const int hw = s.height * s.width;
  if (hw == 1) return x;
  Tensor out(s.channels, static_cast<Eigen::Index>(batch) * hw);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int p = 0; p < hw; ++p) out(c, static_cast<Eigen::Index>(b) * hw + p) = x(c * hw + p, b);
  return out;
}

const Tensor* find_bias(const ParameterSet& params, const LayerSpec& l) {
  return l.bias ? &params.at(l.name + ".bias") : nullptr;
}

}  // namespace

Tensor forward(const Architecture& arch, const ParameterSet& params, const Tensor& input, int batch,
               ForwardCache* cache) {
  const auto shapes = arch.shapes();
  if (cache) {
    cache->batch = batch;
    cache->layers.assign(arch.layers.size(), {});
  }
  ActivationShape in = arch.input;
  if (input.rows() != in.channels || input.cols() != static_cast<Eigen::Index>(batch) * in.height * in.width)
    fail(ErrorCode::shape_mismatch, "input tensor does not match the architecture");
  Tensor x = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const Tensor& w = params.at(l.name + ".weight");
    const Tensor* bias = find_bias(params, l);
    Tensor pre;
    if (l.kind == LayerSpec::Kind::conv3x3) {
      if (w.rows() != l.out || w.cols() != in.channels * 9)
        fail(ErrorCode::shape_mismatch, "weight shape mismatch in " + l.name);
      Tensor cols = im2col(x, batch, in);
      pre.noalias() = w * cols;
      if (cache) cache->layers[i].cols = std::move(cols);
    } else {
      Tensor flat = flatten(x, batch, in);
      if (w.rows() != l.out || w.cols() != flat.rows())
        fail(ErrorCode::shape_mismatch, "weight shape mismatch in " + l.name);
      pre.noalias() = w * flat;
      if (cache) cache->layers[i].input = std::move(flat);
    }
    if (bias) pre.colwise() += bias->col(0);
    Tensor act = l.relu ? Tensor(pre.cwiseMax(0.0f)) : pre;
    if (cache) cache->layers[i].pre = std::move(pre);

    const ActivationShape out = shapes[i];
    if (l.kind == LayerSpec::Kind::conv3x3 && l.pool == Pool::max2) {
      const int H = in.height, W = in.width, Ho = out.height, Wo = out.width;
      Tensor pooled(l.out, static_cast<Eigen::Index>(batch) * Ho * Wo);
      std::vector<int> arg;
      if (cache) arg.resize(static_cast<std::size_t>(pooled.size()));
      for (int b = 0; b < batch; ++b)
        for (int yo = 0; yo < Ho; ++yo)
          for (int xo = 0; xo < Wo; ++xo) {
            const Eigen::Index m = (static_cast<Eigen::Index>(b) * Ho + yo) * Wo + xo;
            const Eigen::Index base = (static_cast<Eigen::Index>(b) * H + 2 * yo) * W + 2 * xo;
            const Eigen::Index cand[4] = {base, base + 1, base + W, base + W + 1};
            for (int c = 0; c < l.out; ++c) {
              Eigen::Index best = cand[0];
              for (int k = 1; k < 4; ++k)
                if (act(c, cand[k]) > act(c, best)) best = cand[k];
              pooled(c, m) = act(c, best);
              if (cache) arg[static_cast<std::size_t>(m * l.out + c)] = static_cast<int>(best);
            }
          }
      if (cache) cache->layers[i].argmax = std::move(arg);
      x = std::move(pooled);
    } else if (l.kind == LayerSpec::Kind::conv3x3 && l.pool == Pool::global_avg) {
      const int hw = in.height * in.width;
      Tensor pooled(l.out, batch);
      for (int b = 0; b < batch; ++b)
        pooled.col(b) = act.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().mean();
      x = std::move(pooled);
    } else {
      x = std::move(act);
    }
    in = out;
  }
  return x;
}

ParameterSet backward(const Architecture& arch, const ParameterSet& params, const ForwardCache& cache,
                      const Tensor& grad_output) {
  const auto shapes = arch.shapes();
  if (cache.layers.size() != arch.layers.size()) fail(ErrorCode::invalid_argument, "forward cache missing");
  const int batch = cache.batch;
  ParameterSet grads = params.zeros_like();
  Tensor g = grad_output;
  for (std::size_t ri = arch.layers.size(); ri-- > 0;) {
    const auto& l = arch.layers[ri];
    const auto& lc = cache.layers[ri];
    const ActivationShape in = ri == 0 ? arch.input : shapes[ri - 1];
    Tensor dact;
    if (l.kind == LayerSpec::Kind::conv3x3 && l.pool == Pool::max2) {
      dact.setZero(l.out, static_cast<Eigen::Index>(batch) * in.height * in.width);
      for (Eigen::Index m = 0; m < g.cols(); ++m)
        for (int c = 0; c < l.out; ++c) dact(c, lc.argmax[static_cast<std::size_t>(m * l.out + c)]) += g(c, m);
    } else if (l.kind == LayerSpec::Kind::conv3x3 && l.pool == Pool::global_avg) {
      const int hw = in.height * in.width;
      dact.resize(l.out, static_cast<Eigen::Index>(batch) * hw);
      for (int b = 0; b < batch; ++b)
        dact.middleCols(static_cast<Eigen::Index>(b) * hw, hw) = (g.col(b) / static_cast<float>(hw)).replicate(1, hw);
    } else {
      dact = g;
    }
    Tensor dpre = l.relu ? Tensor((lc.pre.array() > 0.0f).select(dact.array(), 0.0f)) : dact;

    const Tensor& w = params.at(l.name + ".weight");
    if (l.kind == LayerSpec::Kind::conv3x3) {
      grads.at(l.name + ".weight").noalias() = dpre * lc.cols.transpose();
    } else {
      grads.at(l.name + ".weight").noalias() = dpre * lc.input.transpose();
    }
    if (l.bias) grads.at(l.name + ".bias") = dpre.rowwise().sum();
    if (ri == 0) break;
    if (l.kind == LayerSpec::Kind::conv3x3) {
      const Tensor dcols = w.transpose() * dpre;
      col2im(dcols, batch, in, g);
    } else {
      const Tensor dflat = w.transpose() * dpre;
      g = unflatten(dflat, batch, in);
    }
  }
  return grads;
}

Matrix Encoder::embed(std::span<const Image> images) const { return embed_with(params, images); }

Matrix Encoder::embed_with(const ParameterSet& effective, std::span<const Image> images) const {
  const int d = arch.embedding_dim();
  Matrix out(static_cast<Eigen::Index>(images.size()), d);
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t n = std::min(chunk, images.size() - start);
    const Tensor x = pack_images(images.subspan(start, n), arch.input);
    const Tensor y = forward(arch, effective, x, static_cast<int>(n));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = y.transpose().cast<double>();
  }
  return out;
}

LinearHead LinearHead::make(int in, int out, std::uint64_t seed) {
  LinearHead h;
  Rng rng(derive_seed(seed, "head"));
  std::normal_distribution<double> gauss(0.0, std::sqrt(1.0 / in));
  Tensor w(out, in);
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<float>(gauss(rng));
  h.params.entries.push_back({"weight", std::move(w)});
  h.params.entries.push_back({"bias", Tensor::Zero(out, 1)});
  return h;
}

Matrix LinearHead::forward(const Matrix& x) const {
  const Matrix w = params.at("weight").cast<double>();
  const Vector b = params.at("bias").col(0).cast<double>();
  Matrix logits = x * w.transpose();
  logits.rowwise() += b.transpose();
  return logits;
}

Matrix LinearHead::backward(const Matrix& x, const Matrix& grad_logits, ParameterSet& grads) const {
  const Matrix w = params.at("weight").cast<double>();
  grads.at("weight") += (grad_logits.transpose() * x).cast<float>();
  grads.at("bias") += grad_logits.colwise().sum().transpose().cast<float>();
  return grad_logits * w;
}

void Sgd::step(ParameterSet& params, const ParameterSet& grads, double lr, const ParameterSet* trainable) {
  if (!params.same_layout(grads)) fail(ErrorCode::shape_mismatch, "gradient layout differs from parameters");
  if (trainable && !params.same_layout(*trainable))
    fail(ErrorCode::shape_mismatch, "trainable mask layout differs from parameters");
  if (!velocity_.same_layout(params)) velocity_ = params.zeros_like();
  const float mu = static_cast<float>(options_.momentum);
  const float wd = static_cast<float>(options_.weight_decay);
  const float step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& p = params.entries[i].value;
    auto& v = velocity_.entries[i].value;
    const auto& g = grads.entries[i].value;
    Tensor update = mu * v + g + wd * p;
    if (trainable) {
      const auto keep = trainable->entries[i].value.array() > 0.0f;
      v = keep.select(update.array(), 0.0f);
      p = keep.select(p.array() - step * v.array(), p.array());
    } else {
      v = std::move(update);
      p -= step * v;
    }
  }
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 1) return base_lr;
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

namespace {
constexpr char kParamMagic[4] = {'F', 'S', 'P', 'S'};
constexpr std::uint32_t kParamVersion = 1;
}  // namespace

void write_parameters(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(kParamMagic, 4);
  out.write(reinterpret_cast<const char*>(&kParamVersion), sizeof kParamVersion);
  const std::uint32_t n = static_cast<std::uint32_t>(params.entries.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& e : params.entries) {
    const std::uint32_t len = static_cast<std::uint32_t>(e.name.size());
    const std::uint32_t rows = static_cast<std::uint32_t>(e.value.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(e.value.cols());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(e.name.data(), len);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(e.value.data()), static_cast<std::streamsize>(e.value.size() * sizeof(float)));
  }
}

ParameterSet read_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::corrupt_checkpoint, "cannot read " + path.string());
  char magic[4];
  std::uint32_t version = 0, n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kParamMagic, 4) != 0) fail(ErrorCode::corrupt_checkpoint, "bad parameter file " + path.string());
  if (version != kParamVersion) fail(ErrorCode::version_mismatch, "parameter file version " + std::to_string(version));
  ParameterSet params;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t len = 0, rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > 4096) fail(ErrorCode::corrupt_checkpoint, "bad parameter name in " + path.string());
    std::string name(len, '\0');
    in.read(name.data(), len);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    Tensor value(rows, cols);
    in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(float)));
    if (!in) fail(ErrorCode::corrupt_checkpoint, "truncated parameter file " + path.string());
    params.entries.push_back({std::move(name), std::move(value)});
  }
  return params;
}

}  // namespace fscil
