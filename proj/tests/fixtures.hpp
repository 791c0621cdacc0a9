#pragma once

#include <unistd.h>

#include <random>

#include "dnas3d/search_space.hpp"
#include "dnas3d/tensor.hpp"
#include "gradcheck.hpp"

namespace fixtures {

// Small enough for many forward passes per test.
inline dnas3d::SupernetConfig tiny_config(int size = 8) {
  dnas3d::SupernetConfig c;
  c.num_cells = 3;
  c.blocks_per_cell = {2, 2, 1};
  c.channels_per_cell = {4, 8, 8};
  c.stride2_cells = {1, 2};
  c.stem_channels = 4;
  c.num_classes = 3;
  c.input_shape = {size, size, size};
  return c;
}

inline dnas3d::Tensor random_input(std::size_t batch, const dnas3d::SupernetConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto [d, h, w] = c.input_shape;
  return dnas3d::Tensor(gradcheck::random_array({batch, 1, std::size_t(d), std::size_t(h), std::size_t(w)}, rng));
}

}  // namespace fixtures

#include <filesystem>
#include <string>

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dnas3d_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
