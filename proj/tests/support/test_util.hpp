#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gca/matrix.hpp"

namespace gca::testing {

inline DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, scale);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = n01(rng);
  return m;
}

inline DenseMatrix uniform_positive(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = 0.05,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = u(rng);
  return m;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gca_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace gca::testing
