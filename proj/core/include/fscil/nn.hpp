#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fscil/geometry.hpp"
#include "fscil/image.hpp"

namespace fscil {

// Activations are channel-major: (channels, batch * height * width).
using Tensor = Eigen::MatrixXf;

enum class Pool { none, max2, global_avg };

struct LayerSpec {
  enum class Kind { conv3x3, linear };

  std::string name;
  Kind kind = Kind::conv3x3;
  int out = 0;
  bool relu = true;
  Pool pool = Pool::none;  // conv only
  bool bias = true;
};

struct ActivationShape {
  int channels = 0;
  int height = 1;
  int width = 1;

  int features() const noexcept { return channels * height * width; }
};

/// A sequential network of 3x3 same-padded convolutions and fully connected
/// layers. The last layer's output is the embedding.
struct Architecture {
  ActivationShape input;
  std::vector<LayerSpec> layers;

  int embedding_dim() const;
  // Output shape of every layer; throws on an inconsistent stack.
  std::vector<ActivationShape> shapes() const;
  std::vector<std::string> layer_names() const;

  /// Four conv blocks (conv-relu-pool) followed by a linear embedding layer.
  /// Blocks 1-3 max-pool, block 4 global-average-pools.
  static Architecture conv4(int in_channels, int image_size, std::vector<int> channels, int embedding_dim);
  static Architecture mlp(ActivationShape input, std::vector<int> hidden, int out, bool bias);
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered named tensors. Names follow "<layer>.weight" / "<layer>.bias".
class ParameterSet {
 public:
  std::vector<NamedTensor> entries;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t parameter_count() const;
  ParameterSet zeros_like() const;
  bool same_layout(const ParameterSet& other) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);
};

// Layer name of a parameter ("block2.weight" -> "block2").
std::string layer_of(const std::string& parameter_name);

ParameterSet init_parameters(const Architecture& arch, std::uint64_t seed);

struct ForwardCache {
  struct Layer {
    Tensor input;          // linear layers: flattened input
    Tensor cols;           // conv layers: im2col buffer
    Tensor pre;            // pre-activation
    std::vector<int> argmax;
  };
  int batch = 0;
  std::vector<Layer> layers;
};

// Packs images into (C, B*H*W).
Tensor pack_images(std::span<const Image> images, const ActivationShape& shape);

/// Runs the stack on `input` (C, B*H*W); returns (embedding_dim, B).
Tensor forward(const Architecture& arch, const ParameterSet& params, const Tensor& input, int batch,
               ForwardCache* cache = nullptr);

/// Parameter gradients for d(loss)/d(output) = `grad_output` (embedding_dim, B).
ParameterSet backward(const Architecture& arch, const ParameterSet& params, const ForwardCache& cache,
                      const Tensor& grad_output);

struct Encoder {
  Architecture arch;
  ParameterSet params;

  /// Raw embeddings, one row per image.
  Matrix embed(std::span<const Image> images) const;
  Matrix embed_with(const ParameterSet& effective, std::span<const Image> images) const;
};

/// Linear head applied to row embeddings: logits = x W^T + b.
struct LinearHead {
  ParameterSet params;  // "weight" (out x in), "bias" (out x 1)

  static LinearHead make(int in, int out, std::uint64_t seed);
  Matrix forward(const Matrix& x) const;
  // Returns d(loss)/dx and accumulates weight gradients into `grads`.
  Matrix backward(const Matrix& x, const Matrix& grad_logits, ParameterSet& grads) const;
};

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// SGD with momentum. Entries whose `trainable` value is 0 are never touched.
class Sgd {
 public:
  explicit Sgd(SgdOptions options = {}) : options_(options) {}
  void step(ParameterSet& params, const ParameterSet& grads, double lr, const ParameterSet* trainable = nullptr);

 private:
  SgdOptions options_;
  ParameterSet velocity_;
};

double cosine_lr(double base_lr, int epoch, int total_epochs);

void write_parameters(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet read_parameters(const std::filesystem::path& path);

}  // namespace fscil
