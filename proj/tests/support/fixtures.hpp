#pragma once

#include <random>
#include <vector>

#include "ecechain/nn/tensor.hpp"
#include "ecechain/util/rng.hpp"

namespace ecechain::fixtures {

inline std::vector<double> uniform_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <typename T = double>
nn::Tensor<T> random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  const auto raw = uniform_values(nn::element_count(shape), rng, lo, hi);
  return nn::Tensor<T>(std::move(shape), std::vector<T>(raw.begin(), raw.end()), requires_grad);
}

inline std::vector<double> as_double(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace ecechain::fixtures

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace ecechain::fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ecechain_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path_ / name, std::ios::binary);
    out << text;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace ecechain::fixtures
