#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ctxbias/data.hpp"
#include "ctxbias/matrix.hpp"
#include "ctxbias/rng.hpp"

namespace ctxbias::testing {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ctxbias-test-" + std::to_string(rd()) + std::to_string(rd()));
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

 private:
  std::filesystem::path path_;
};

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows = 28,
                                            std::uint32_t cols = 28, std::uint32_t magic = 0x803,
                                            std::uint8_t fill = 0) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  put_be32(out, n);
  put_be32(out, rows);
  put_be32(out, cols);
  for (std::size_t i = 0; i < std::size_t{n} * rows * cols; ++i) {
    out.push_back(static_cast<std::uint8_t>(fill + i % 251));
  }
  return out;
}

inline std::vector<std::uint8_t> idx_labels(std::uint32_t n, std::uint32_t magic = 0x801) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  put_be32(out, n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(i % 10));
  return out;
}

// CIFAR-100 records with fine = i % 100 and the matching superclass byte.
inline std::vector<std::uint8_t> cifar_records(std::size_t n) {
  std::vector<std::uint8_t> out;
  const auto& map = cifar100_superclass_map();
  for (std::size_t i = 0; i < n; ++i) {
    const auto fine = static_cast<Label>(i % 100);
    out.push_back(static_cast<std::uint8_t>(map.coarse_of(fine)));
    out.push_back(static_cast<std::uint8_t>(fine));
    for (std::size_t k = 0; k < 3072; ++k) out.push_back(static_cast<std::uint8_t>((i + k) % 256));
  }
  return out;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  return rng_uniform(rng, rows, cols, -1.0, 1.0);
}

}  // namespace ctxbias::testing
