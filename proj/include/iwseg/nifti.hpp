#pragma once

// Read-only ingestion of uncompressed single-file NIfTI-1 (.nii) volumes.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "iwseg/bytes.hpp"
#include "iwseg/volume.hpp"

namespace iwseg {

namespace nifti {

inline constexpr std::size_t kHeaderSize = 348;

// Byte offsets inside the NIfTI-1 header.
inline constexpr std::size_t kOffDim = 40;
inline constexpr std::size_t kOffDatatype = 70;
inline constexpr std::size_t kOffBitpix = 72;
inline constexpr std::size_t kOffPixdim = 76;
inline constexpr std::size_t kOffVoxOffset = 108;
inline constexpr std::size_t kOffSclSlope = 112;
inline constexpr std::size_t kOffSclInter = 116;
inline constexpr std::size_t kOffMagic = 344;

inline constexpr std::int16_t kUint8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kFloat32 = 16;
inline constexpr std::int16_t kFloat64 = 64;

}  // namespace nifti

namespace detail {

class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T at(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    const bool native_le = std::endian::native == std::endian::little;
    // swap_ says the file is big-endian; combine with host order.
    if (swap_ == native_le) v = byteswap(v);
    return v;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  bool swap_;
};

template <typename T>
Volume decode_nifti_payload(const std::vector<unsigned char>& bytes, std::size_t offset, Shape shape, Spacing spacing,
                            bool big_endian) {
  std::vector<T> data = decode_le<T>(bytes.data() + offset, shape.voxels());
  if (big_endian && sizeof(T) > 1) {
    for (auto& v : data) v = byteswap(v);
  }
  return Grid<T>(shape, spacing, std::move(data));
}

}  // namespace detail

/// Parses a NIfTI-1 file already held in memory.
inline Volume parse_nifti(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    throw ValidationError("compressed NIfTI unsupported: " + name);
  }
  detail::require(bytes.size() >= nifti::kHeaderSize, "truncated NIfTI header: " + name);

  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool big_endian;
  const std::int32_t le_value = std::endian::native == std::endian::little ? sizeof_hdr : detail::byteswap(sizeof_hdr);
  if (le_value == static_cast<std::int32_t>(nifti::kHeaderSize)) {
    big_endian = false;
  } else if (detail::byteswap(le_value) == static_cast<std::int32_t>(nifti::kHeaderSize)) {
    big_endian = true;
  } else {
    throw ValidationError("NIfTI header length " + std::to_string(le_value) + " != 348: " + name);
  }
  const detail::HeaderReader h(bytes, big_endian);

  if (std::memcmp(bytes.data() + nifti::kOffMagic, "n+1\0", 4) != 0) {
    throw ValidationError("NIfTI magic is not \"n+1\": " + name);
  }

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = h.at<std::int16_t>(nifti::kOffDim + 2 * i);
  if (dim[0] != 3) throw ValidationError("NIfTI dim[0] = " + std::to_string(dim[0]) + ", expected 3: " + name);
  for (int i = 1; i <= 3; ++i) {
    detail::require(dim[i] > 0, "NIfTI dim[" + std::to_string(i) + "] must be positive: " + name);
  }

  const auto datatype = h.at<std::int16_t>(nifti::kOffDatatype);
  std::size_t elem = 0;
  switch (datatype) {
    case nifti::kUint8: elem = 1; break;
    case nifti::kInt16: elem = 2; break;
    case nifti::kFloat32: elem = 4; break;
    case nifti::kFloat64: elem = 8; break;
    default: throw ValidationError("unsupported datatype " + std::to_string(datatype) + ": " + name);
  }

  float pixdim[4];
  for (int i = 0; i < 4; ++i) pixdim[i] = h.at<float>(nifti::kOffPixdim + 4 * i);
  const Spacing spacing{std::fabs(static_cast<double>(pixdim[3])), std::fabs(static_cast<double>(pixdim[2])),
                        std::fabs(static_cast<double>(pixdim[1]))};
  detail::require(spacing.valid(), "NIfTI pixdim[1..3] must be finite and non-zero: " + name);

  const float vox_offset_f = h.at<float>(nifti::kOffVoxOffset);
  detail::require(std::isfinite(vox_offset_f) && vox_offset_f >= static_cast<float>(nifti::kHeaderSize),
                  "NIfTI vox_offset must be >= 348: " + name);
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);

  // NIfTI stores i fastest (x), then j (y), then k (z): identical to our C order over (z, y, x).
  const Shape shape{static_cast<std::size_t>(dim[3]), static_cast<std::size_t>(dim[2]),
                    static_cast<std::size_t>(dim[1])};
  const std::size_t payload = shape.voxels() * elem;
  detail::require(bytes.size() >= vox_offset + payload,
                  "NIfTI payload truncated: need " + std::to_string(vox_offset + payload) + " bytes, have " +
                      std::to_string(bytes.size()) + ": " + name);

  Volume v;
  switch (datatype) {
    case nifti::kUint8: v = detail::decode_nifti_payload<std::uint8_t>(bytes, vox_offset, shape, spacing, big_endian); break;
    case nifti::kInt16: v = detail::decode_nifti_payload<std::int16_t>(bytes, vox_offset, shape, spacing, big_endian); break;
    case nifti::kFloat32: v = detail::decode_nifti_payload<float>(bytes, vox_offset, shape, spacing, big_endian); break;
    default: v = detail::decode_nifti_payload<double>(bytes, vox_offset, shape, spacing, big_endian); break;
  }

  const double slope = h.at<float>(nifti::kOffSclSlope);
  const double inter = h.at<float>(nifti::kOffSclInter);
  if (slope != 0.0 && std::isfinite(slope) && !(slope == 1.0 && inter == 0.0)) {
    Grid<double> scaled = convert<double>(v);
    for (auto& x : scaled.data()) x = slope * x + inter;
    v = std::move(scaled);
  }
  return v;
}

inline Volume load_nifti(const std::string& path) { return parse_nifti(detail::read_file(path), path); }

}  // namespace iwseg
