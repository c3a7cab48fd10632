#pragma once

// VOL container: `<stem>.volhdr` holds a JSON header
//   {"shape":[z,y,x],"dtype":"u8"|"i16"|"f32"|"f64","spacing_mm":[z,y,x]}
// and `<stem>.volraw` the little-endian voxel payload in C order (x fastest).

#include <cstdint>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "iwseg/bytes.hpp"
#include "iwseg/volume.hpp"

namespace iwseg {

struct VolPaths {
  std::string header;
  std::string raw;
};

/// Accepts `<stem>`, `<stem>.volhdr`, `<stem>.volraw` or `<stem>.vol`.
inline VolPaths vol_paths(std::string path) {
  for (const char* ext : {".volhdr", ".volraw", ".vol"}) {
    const std::string e(ext);
    if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) {
      path.resize(path.size() - e.size());
      break;
    }
  }
  return {path + ".volhdr", path + ".volraw"};
}

namespace detail {

inline Shape parse_shape(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 3, "header field \"shape\" must be an array of 3 integers");
  std::size_t dims[3];
  for (std::size_t i = 0; i < 3; ++i) {
    require(j[i].is_number_integer() && j[i].get<std::int64_t>() > 0, "header field \"shape\" must hold positive integers");
    dims[i] = j[i].get<std::size_t>();
  }
  return {dims[0], dims[1], dims[2]};
}

inline Spacing parse_spacing(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 3, "header field \"spacing_mm\" must be an array of 3 numbers");
  for (const auto& e : j) require(e.is_number(), "header field \"spacing_mm\" must hold numbers");
  Spacing s{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  require(s.valid(), "header field \"spacing_mm\" must be finite and > 0");
  return s;
}

template <typename T>
Volume decode_grid(Shape shape, Spacing spacing, const std::vector<unsigned char>& raw) {
  return Grid<T>(shape, spacing, decode_le<T>(raw.data(), shape.voxels()));
}

}  // namespace detail

inline Volume load_vol(const std::string& path) {
  const VolPaths p = vol_paths(path);
  const auto hdr_bytes = detail::read_file(p.header);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hdr_bytes.begin(), hdr_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("garbled header " + p.header + ": " + e.what());
  }
  detail::require(hdr.is_object(), "garbled header " + p.header + ": not a JSON object");
  for (const char* key : {"shape", "dtype", "spacing_mm"}) {
    detail::require(hdr.contains(key), "header " + p.header + " lacks \"" + key + "\"");
  }
  detail::require(hdr["dtype"].is_string(), "header field \"dtype\" must be a string");
  const Shape shape = detail::parse_shape(hdr["shape"]);
  const DType dtype = parse_dtype(hdr["dtype"].get<std::string>());
  const Spacing spacing = detail::parse_spacing(hdr["spacing_mm"]);

  const auto raw = detail::read_file(p.raw);
  const std::size_t expected = shape.voxels() * dtype_size(dtype);
  if (raw.size() != expected) {
    throw ValidationError("size mismatch: " + p.raw + " has " + std::to_string(raw.size()) + " bytes, header implies " +
                          std::to_string(expected));
  }
  switch (dtype) {
    case DType::u8: return detail::decode_grid<std::uint8_t>(shape, spacing, raw);
    case DType::i16: return detail::decode_grid<std::int16_t>(shape, spacing, raw);
    case DType::f32: return detail::decode_grid<float>(shape, spacing, raw);
    case DType::f64: return detail::decode_grid<double>(shape, spacing, raw);
  }
  throw InvariantError("unreachable dtype");
}

inline std::string vol_header_json(const Volume& v) {
  const Shape& s = shape_of(v);
  const Spacing& sp = spacing_of(v);
  nlohmann::ordered_json hdr;
  hdr["shape"] = {s.z, s.y, s.x};
  hdr["dtype"] = std::string(to_string(dtype_of(v)));
  hdr["spacing_mm"] = {sp.z, sp.y, sp.x};
  return hdr.dump();
}

inline void save_vol(const Volume& v, const std::string& path) {
  const VolPaths p = vol_paths(path);
  std::vector<unsigned char> raw;
  std::visit(
      [&](const auto& g) {
        raw.reserve(g.size() * sizeof(typename std::decay_t<decltype(g)>::value_type));
        detail::append_le(raw, g.data().data(), g.size());
      },
      v);
  detail::write_text(p.header, vol_header_json(v) + "\n");
  detail::write_file(p.raw, raw);
}

}  // namespace iwseg
