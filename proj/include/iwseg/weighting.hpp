#pragma once

#include <vector>

#include "iwseg/components.hpp"
#include "iwseg/volume.hpp"

namespace iwseg {

/// Per-voxel inverse weights plus the weight of each component L_0..L_K.
struct WeightMap {
  Grid<double> weights;
  std::vector<double> component_weights;  // 0.0 for an empty background
};

/// Every voxel of component L_j gets N / (M * |L_j|), M being the number of
/// nonempty components. Each component then carries the same total weight N / M
/// and all weights sum to N.
inline WeightMap inverse_weight_map(const ComponentSet& cs) {
  const std::size_t n = cs.voxels();
  std::size_t nonempty = 0;
  for (std::size_t size : cs.sizes) nonempty += size > 0 ? 1 : 0;

  WeightMap out;
  out.component_weights.assign(cs.sizes.size(), 0.0);
  const double total = static_cast<double>(n);
  const double m = static_cast<double>(nonempty);
  for (std::size_t k = 0; k < cs.sizes.size(); ++k) {
    if (cs.sizes[k] > 0) out.component_weights[k] = total / (m * static_cast<double>(cs.sizes[k]));
  }

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = out.component_weights[static_cast<std::size_t>(cs.labels[i])];
  out.weights = Grid<double>(cs.labels.shape(), cs.labels.spacing(), std::move(w));
  return out;
}

inline WeightMap inverse_weight_map(const Mask& mask, Connectivity connectivity = Connectivity::vertex) {
  return inverse_weight_map(label_components(mask, connectivity));
}

enum class WeightScope {
  patch,        // components are found inside the patch; truncated lesions count their in-patch volume
  whole_image,  // weights come from the full mask and are then cropped
};

/// Weights for the patch [origin, origin + extent) of `mask`.
inline WeightMap patch_weight_map(const Mask& mask, Offset origin, Shape extent,
                                  Connectivity connectivity = Connectivity::vertex,
                                  WeightScope scope = WeightScope::patch) {
  if (scope == WeightScope::patch) return inverse_weight_map(crop(mask, origin, extent), connectivity);
  WeightMap whole = inverse_weight_map(mask, connectivity);
  // Padding voxels outside the image behave as background.
  const double background = whole.component_weights[0] > 0 ? whole.component_weights[0] : 1.0;
  return {crop(whole.weights, origin, extent, background), std::move(whole.component_weights)};
}

}  // namespace iwseg
