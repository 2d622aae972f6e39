#include "fscil/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

namespace {

int read_header_int(std::istream& in) {
  int value = 0;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      in.unget();
      break;
    }
  }
  if (!(in >> value)) fail(ErrorCode::data, "malformed netpbm header");
  return value;
}

}  // namespace

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open image " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    fail(ErrorCode::data, "unsupported image format in " + path.string());
  }
  const int width = read_header_int(in);
  const int height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
    fail(ErrorCode::data, "bad netpbm dimensions in " + path.string());
  in.get();  // single whitespace before raster

  Image image(height, width, channels);
  std::vector<unsigned char> raw(image.pixels.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    fail(ErrorCode::data, "truncated raster in " + path.string());
  std::transform(raw.begin(), raw.end(), image.pixels.begin(),
                 [maxval](unsigned char v) { return static_cast<float>(v) / maxval; });
  return image;
}

void write_netpbm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    fail(ErrorCode::invalid_argument, "netpbm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write image " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(), [](float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace fscil
