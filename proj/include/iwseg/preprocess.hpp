#pragma once

#include <algorithm>
#include <optional>

#include "iwseg/volume.hpp"

namespace iwseg {

struct PreprocessConfig {
  double clip_lo = -1000.0;
  double clip_hi = 300.0;
  std::optional<double> outside_fill;  // written where the organ mask is 0
  bool rescale = true;
};

/// Clips intensities, optionally blanks voxels outside an organ mask, then
/// min-max scales each image to [0, 1]. A constant image scales to zeros.
inline Grid<float> preprocess(const Volume& volume, const PreprocessConfig& config,
                              const Mask* organ_mask = nullptr) {
  detail::require(config.clip_lo < config.clip_hi, "clip_lo must be < clip_hi");
  Grid<double> v = convert<double>(volume);
  if (organ_mask != nullptr) require_same_shape(v.shape(), organ_mask->shape(), "image vs organ mask");

  for (std::size_t i = 0; i < v.size(); ++i) {
    double x = std::clamp(v[i], config.clip_lo, config.clip_hi);
    if (organ_mask != nullptr && config.outside_fill && (*organ_mask)[i] == 0) x = *config.outside_fill;
    v[i] = x;
  }

  if (config.rescale) {
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const double min = *lo;
    const double range = *hi - min;
    for (auto& x : v.data()) x = range > 0 ? (x - min) / range : 0.0;
  }
  return convert<float>(v);
}

}  // namespace iwseg
