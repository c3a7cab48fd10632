#pragma once

// Lesion-biased random patch extraction.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "iwseg/random.hpp"
#include "iwseg/volume.hpp"

namespace iwseg {

struct PatchSpec {
  Shape size{128, 128, 128};
  double lesion_prob = 0.5;
  double pad_value = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const PatchSpec& s) {
  detail::require(s.size.z >= 1 && s.size.y >= 1 && s.size.x >= 1, "patch size components must be >= 1");
  detail::require(s.lesion_prob >= 0 && s.lesion_prob <= 1, "lesion probability must lie in [0, 1]");
}

template <typename T>
struct Patch {
  Grid<T> image;
  Mask mask;
  Offset origin;             // in original image coordinates; negative along padded axes
  bool lesion_biased = false;  // drawn around a lesion voxel
  bool fell_back = false;      // lesion draw requested but the mask was empty
};

/// One generator stream; not safe to share between threads.
class PatchSampler {
 public:
  explicit PatchSampler(PatchSpec spec) : spec_(spec), rng_(spec.seed) { validate(spec_); }

  const PatchSpec& spec() const noexcept { return spec_; }

  /// With probability lesion_prob: pick a lesion voxel uniformly, then an
  /// origin uniformly among those whose patch covers it. Otherwise the origin
  /// is uniform over all valid origins. Axes shorter than the patch are padded
  /// symmetrically (image with pad_value, mask with 0).
  template <typename T>
  Patch<T> sample(const Grid<T>& image, const Mask& mask) {
    require_same_shape(image.shape(), mask.shape(), "image vs mask");
    const Shape s = image.shape();

    Patch<T> out;
    const bool want_lesion = uniform_unit(rng_) < spec_.lesion_prob;
    std::int64_t coord[3] = {-1, -1, -1};
    if (want_lesion) {
      std::size_t count = 0;
      for (auto v : mask.data()) count += v != 0 ? 1 : 0;
      if (count == 0) {
        out.fell_back = true;
      } else {
        auto k = uniform_index(rng_, count);
        std::size_t idx = 0;
        for (; idx < mask.size(); ++idx) {
          if (mask[idx] != 0 && k-- == 0) break;
        }
        coord[0] = static_cast<std::int64_t>(idx / (s.y * s.x));
        coord[1] = static_cast<std::int64_t>((idx / s.x) % s.y);
        coord[2] = static_cast<std::int64_t>(idx % s.x);
        out.lesion_biased = true;
      }
    }

    std::int64_t origin[3];
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const auto dim = static_cast<std::int64_t>(s[axis]);
      const auto patch = static_cast<std::int64_t>(spec_.size[axis]);
      if (dim <= patch) {
        origin[axis] = -((patch - dim) / 2);
        continue;
      }
      std::int64_t lo = 0, hi = dim - patch;
      if (out.lesion_biased) {
        lo = std::max<std::int64_t>(0, coord[axis] - patch + 1);
        hi = std::min<std::int64_t>(coord[axis], dim - patch);
      }
      origin[axis] = uniform_between(rng_, lo, hi);
    }
    out.origin = {origin[0], origin[1], origin[2]};
    out.image = crop(image, out.origin, spec_.size, static_cast<T>(spec_.pad_value));
    out.mask = crop(mask, out.origin, spec_.size, std::uint8_t{0});
    return out;
  }

 private:
  PatchSpec spec_;
  Rng rng_;
};

}  // namespace iwseg
