#pragma once

#include <filesystem>
#include <vector>

namespace fscil {

// H x W x C pixel tensor, row-major with interleaved channels, values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool empty() const noexcept { return pixels.empty(); }
  bool is_square() const noexcept { return height == width; }

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary netpbm (P5 grayscale / P6 RGB, maxval 255).
Image read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Image& image);

}  // namespace fscil
