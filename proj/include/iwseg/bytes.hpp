#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "iwseg/error.hpp"

namespace iwseg::detail {

template <typename T>
T byteswap(T v) noexcept {
  auto* b = reinterpret_cast<unsigned char*>(&v);
  std::reverse(b, b + sizeof(T));
  return v;
}

/// Decodes `count` values of T stored little-endian at `src`.
template <typename T>
std::vector<T> decode_le(const unsigned char* src, std::size_t count) {
  std::vector<T> out(count);
  if (count != 0) std::memcpy(out.data(), src, count * sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (auto& v : out) v = byteswap(v);
  }
  return out;
}

template <typename T>
void append_le(std::vector<unsigned char>& dst, const T* src, std::size_t count) {
  const std::size_t at = dst.size();
  dst.resize(at + count * sizeof(T));
  if (count != 0) std::memcpy(dst.data() + at, src, count * sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < count; ++i) {
      std::reverse(dst.data() + at + i * sizeof(T), dst.data() + at + (i + 1) * sizeof(T));
    }
  }
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return bytes;
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace iwseg::detail
