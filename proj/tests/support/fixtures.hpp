#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "iwseg/volume.hpp"

namespace iwseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("iwseg_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Minimal little-endian NIfTI-1 single file, assembled field by field.
struct NiftiBuilder {
  std::int16_t dims[3] = {2, 2, 2};  // nx, ny, nz
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  float pixdim[3] = {1, 1, 1};
  float scl_slope = 0;
  float scl_inter = 0;
  std::int16_t ndim = 3;
  std::vector<unsigned char> payload;

  template <typename T>
  static void put(std::vector<unsigned char>& b, std::size_t off, T v) {
    std::memcpy(b.data() + off, &v, sizeof(T));
  }

  std::vector<unsigned char> bytes() const {
    std::vector<unsigned char> b(352, 0);
    put<std::int32_t>(b, 0, 348);
    put<std::int16_t>(b, 40, ndim);
    put<std::int16_t>(b, 42, dims[0]);
    put<std::int16_t>(b, 44, dims[1]);
    put<std::int16_t>(b, 46, dims[2]);
    for (int i = 4; i < 8; ++i) put<std::int16_t>(b, 40 + 2 * i, 1);
    put<std::int16_t>(b, 70, datatype);
    put<std::int16_t>(b, 72, bitpix);
    put<float>(b, 76, 1.0f);  // qfac
    put<float>(b, 80, pixdim[0]);
    put<float>(b, 84, pixdim[1]);
    put<float>(b, 88, pixdim[2]);
    put<float>(b, 108, 352.0f);
    put<float>(b, 112, scl_slope);
    put<float>(b, 116, scl_inter);
    std::memcpy(b.data() + 344, "n+1\0", 4);
    b.resize(352 + payload.size());
    if (!payload.empty()) std::memcpy(b.data() + 352, payload.data(), payload.size());
    return b;
  }

  template <typename T>
  void set_payload(const std::vector<T>& values) {
    payload.resize(values.size() * sizeof(T));
    std::memcpy(payload.data(), values.data(), payload.size());
  }
};

/// 4^3 mask with one 4-voxel lesion (a 2x2 square in slice 1).
inline Mask one_lesion_fixture() {
  Mask m(Shape{4, 4, 4});
  m(1, 1, 1) = m(1, 1, 2) = m(1, 2, 1) = m(1, 2, 2) = 1;
  return m;
}

/// 4^3 mask with a 2-voxel lesion and a separate 6-voxel lesion.
inline Mask two_lesion_fixture() {
  Mask m(Shape{4, 4, 4});
  m(0, 0, 0) = m(0, 0, 1) = 1;
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 3; ++x) m(3, 2 + y, 1 + x) = 1;
  return m;
}

}  // namespace iwseg::testing
