#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "slidepp/raster.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("slidepp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline slidepp::RasterGrid random_grid(const slidepp::GridGeometry& g, std::mt19937_64& gen, double lo = -1.0,
                                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  slidepp::RasterGrid grid(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) grid[i] = u(gen);
  return grid;
}

inline slidepp::RasterGrid constant_grid(const slidepp::GridGeometry& g, double v) {
  return slidepp::RasterGrid(g, v);
}

}  // namespace testing
