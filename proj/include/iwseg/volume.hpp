#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "iwseg/error.hpp"

namespace iwseg {

/// Grid extent in voxels, ordered (z, y, x). x is the fastest-varying axis.
struct Shape {
  std::size_t z = 0;
  std::size_t y = 0;
  std::size_t x = 0;

  constexpr std::size_t voxels() const noexcept { return z * y * x; }
  constexpr std::size_t operator[](std::size_t axis) const noexcept {
    return axis == 0 ? z : (axis == 1 ? y : x);
  }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.z) + "," + std::to_string(s.y) + "," + std::to_string(s.x) + "]";
}

/// Millimeters per voxel along (z, y, x).
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  constexpr double voxel_volume() const noexcept { return z * y * x; }
  bool valid() const noexcept {
    return std::isfinite(z) && std::isfinite(y) && std::isfinite(x) && z > 0 && y > 0 && x > 0;
  }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

/// Signed voxel coordinate; negative values address padding in front of a grid.
struct Offset {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;
  friend constexpr bool operator==(const Offset&, const Offset&) = default;
};

/// Dense 3D grid in C order with x fastest.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  explicit Grid(Shape shape, Spacing spacing = {}, T fill = T{})
      : shape_(shape), spacing_(spacing), data_(shape.voxels(), fill) {
    validate();
  }

  Grid(Shape shape, Spacing spacing, std::vector<T> data)
      : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    validate();
    detail::require(data_.size() == shape_.voxels(),
                    "size mismatch: " + std::to_string(data_.size()) + " elements for shape " +
                        to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return (z * shape_.y + y) * shape_.x + x;
  }

  const T& operator()(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return data_[index(z, y, x)];
  }
  T& operator()(std::size_t z, std::size_t y, std::size_t x) noexcept { return data_[index(z, y, x)]; }

  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void validate() const {
    detail::require(shape_.z > 0 && shape_.y > 0 && shape_.x > 0,
                    "shape components must be positive, got " + to_string(shape_));
    detail::require(spacing_.valid(), "spacing components must be finite and > 0");
  }

  Shape shape_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using ProbMap = Grid<double>;

enum class DType { u8, i16, f32, f64 };

using Volume = std::variant<Grid<std::uint8_t>, Grid<std::int16_t>, Grid<float>, Grid<double>>;

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return DType::u8;
  else if constexpr (std::is_same_v<T, std::int16_t>) return DType::i16;
  else if constexpr (std::is_same_v<T, float>) return DType::f32;
  else {
    static_assert(std::is_same_v<T, double>, "unsupported voxel type");
    return DType::f64;
  }
}

inline DType dtype_of(const Volume& v) {
  return std::visit([](const auto& g) { return dtype_of<typename std::decay_t<decltype(g)>::value_type>(); }, v);
}

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::u8: return 1;
    case DType::i16: return 2;
    case DType::f32: return 4;
    case DType::f64: return 8;
  }
  return 0;
}

inline std::string_view to_string(DType t) {
  switch (t) {
    case DType::u8: return "u8";
    case DType::i16: return "i16";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
  }
  return "?";
}

inline DType parse_dtype(std::string_view s) {
  if (s == "u8") return DType::u8;
  if (s == "i16") return DType::i16;
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw ValidationError("unknown dtype \"" + std::string(s) + "\"");
}

inline const Shape& shape_of(const Volume& v) {
  return std::visit([](const auto& g) -> const Shape& { return g.shape(); }, v);
}

inline const Spacing& spacing_of(const Volume& v) {
  return std::visit([](const auto& g) -> const Spacing& { return g.spacing(); }, v);
}

/// Element-wise static_cast of any stored volume to a grid of T.
template <typename T>
Grid<T> convert(const Volume& v) {
  return std::visit(
      [](const auto& g) {
        using S = typename std::decay_t<decltype(g)>::value_type;
        if constexpr (std::is_same_v<S, T>) {
          return g;
        } else {
          std::vector<T> out(g.size());
          for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<T>(g[i]);
          return Grid<T>(g.shape(), g.spacing(), std::move(out));
        }
      },
      v);
}

template <typename T, typename S>
Grid<T> convert(const Grid<S>& g) {
  return convert<T>(Volume(g));
}

/// Reads any volume as a binary mask; rejects values other than 0 and 1.
inline Mask to_mask(const Volume& v) {
  return std::visit(
      [](const auto& g) {
        std::vector<std::uint8_t> out(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const auto value = g[i];
          if (value == 0) out[i] = 0;
          else if (value == 1) out[i] = 1;
          else throw ValidationError("mask is not binary: voxel " + std::to_string(i) + " holds a value other than 0/1");
        }
        return Mask(g.shape(), g.spacing(), std::move(out));
      },
      v);
}

inline void require_binary(const Mask& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 1) throw ValidationError("mask is not binary: voxel " + std::to_string(i) + " = " + std::to_string(m[i]));
  }
}

inline void require_same_shape(const Shape& a, const Shape& b, std::string_view what) {
  if (!(a == b)) {
    throw ValidationError("shape mismatch (" + std::string(what) + "): " + to_string(a) + " vs " + to_string(b));
  }
}

/// Copies the box [origin, origin + extent) out of `g`; voxels outside `g` take `fill`.
template <typename T>
Grid<T> crop(const Grid<T>& g, Offset origin, Shape extent, T fill = T{}) {
  Grid<T> out(extent, g.spacing(), fill);
  const auto& s = g.shape();
  for (std::size_t z = 0; z < extent.z; ++z) {
    const std::int64_t sz = origin.z + static_cast<std::int64_t>(z);
    if (sz < 0 || sz >= static_cast<std::int64_t>(s.z)) continue;
    for (std::size_t y = 0; y < extent.y; ++y) {
      const std::int64_t sy = origin.y + static_cast<std::int64_t>(y);
      if (sy < 0 || sy >= static_cast<std::int64_t>(s.y)) continue;
      for (std::size_t x = 0; x < extent.x; ++x) {
        const std::int64_t sx = origin.x + static_cast<std::int64_t>(x);
        if (sx < 0 || sx >= static_cast<std::int64_t>(s.x)) continue;
        out(z, y, x) = g(static_cast<std::size_t>(sz), static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
    }
  }
  return out;
}

}  // namespace iwseg
