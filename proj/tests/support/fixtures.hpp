#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fscil/config.hpp"
#include "fscil/geometry.hpp"

namespace fixture {

namespace fs = std::filesystem;

// A few-epoch config on a small toy dataset; seconds per run.
inline fscil::ExperimentConfig tiny_config() {
  fscil::ExperimentConfig c;
  c.name = "tiny";
  c.dataset.toy.classes = 10;
  c.dataset.toy.train_per_class = 20;
  c.dataset.toy.test_per_class = 10;
  c.stream = {6, 2, 5, 2, false};
  c.pretrain.epochs = 2;
  c.pretrain.batch_size = 32;
  c.base.epochs = 3;
  c.base.batch_size = 32;
  c.incremental.epochs_per_session = 2;
  c.subnet.steps = 4;
  c.tricks = fscil::TrickToggles::all_on();
  c.validate();
  return c;
}

inline fscil::Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  fscil::Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

inline fscil::Matrix unit_rows(fscil::Matrix m) {
  for (int i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("fscil-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace fixture
