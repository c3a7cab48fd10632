#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "iwseg/volume.hpp"

namespace iwseg {

enum class Connectivity { face = 6, edge = 18, vertex = 26 };

inline Connectivity parse_connectivity(int n) {
  switch (n) {
    case 6: return Connectivity::face;
    case 18: return Connectivity::edge;
    case 26: return Connectivity::vertex;
    default: throw ValidationError("connectivity must be 6, 18 or 26, got " + std::to_string(n));
  }
}

/// Labeled connected components of a binary mask.
/// Label 0 is the background L_0 (one component even when geometrically split);
/// lesions are 1..K in order of their first voxel in scan order.
struct ComponentSet {
  Grid<std::int32_t> labels;
  std::size_t K = 0;
  std::vector<std::size_t> sizes;  // K + 1 entries, sizes[0] is the background
  Connectivity connectivity = Connectivity::vertex;

  std::size_t lesion_count() const noexcept { return K; }
  std::size_t voxels() const noexcept { return labels.size(); }
};

namespace detail {

struct NeighborOffset {
  int dz, dy, dx;
};

// Neighbors preceding a voxel in raster order.
inline std::vector<NeighborOffset> backward_neighbors(Connectivity c) {
  const int max_nonzero = c == Connectivity::face ? 1 : (c == Connectivity::edge ? 2 : 3);
  std::vector<NeighborOffset> out;
  for (int dz = -1; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const bool before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
        const int nonzero = (dz != 0) + (dy != 0) + (dx != 0);
        if (before && nonzero <= max_nonzero) out.push_back({dz, dy, dx});
      }
    }
  }
  return out;
}

class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t a) {
    std::uint32_t root = a;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[a] != root) {
      const std::uint32_t next = parent_[a];
      parent_[a] = root;
      a = next;
    }
    return root;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Lower id wins so roots stay stable.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace detail

/// Two-pass union-find labeling over the backward neighborhood.
inline ComponentSet label_components(const Mask& mask, Connectivity connectivity = Connectivity::vertex) {
  require_binary(mask);
  const Shape s = mask.shape();
  const auto offsets = detail::backward_neighbors(connectivity);

  // Provisional labels: 0 background, otherwise set id + 1.
  std::vector<std::uint32_t> provisional(mask.size(), 0);
  detail::DisjointSets sets;

  for (std::size_t z = 0; z < s.z; ++z) {
    for (std::size_t y = 0; y < s.y; ++y) {
      for (std::size_t x = 0; x < s.x; ++x) {
        const std::size_t i = mask.index(z, y, x);
        if (mask[i] == 0) continue;
        std::uint32_t label = 0;
        for (const auto& o : offsets) {
          const auto nz = static_cast<std::int64_t>(z) + o.dz;
          const auto ny = static_cast<std::int64_t>(y) + o.dy;
          const auto nx = static_cast<std::int64_t>(x) + o.dx;
          if (nz < 0 || ny < 0 || nx < 0 || ny >= static_cast<std::int64_t>(s.y) ||
              nx >= static_cast<std::int64_t>(s.x)) {
            continue;
          }
          const std::uint32_t n = provisional[mask.index(static_cast<std::size_t>(nz), static_cast<std::size_t>(ny),
                                                         static_cast<std::size_t>(nx))];
          if (n == 0) continue;
          if (label == 0) label = n;
          else if (n != label) sets.unite(label - 1, n - 1);
        }
        provisional[i] = label != 0 ? label : sets.make() + 1;
      }
    }
  }

  ComponentSet out;
  out.connectivity = connectivity;
  out.labels = Grid<std::int32_t>(s, mask.spacing(), 0);
  out.sizes.assign(1, 0);

  // Final labels follow first appearance of each root in scan order.
  std::vector<std::int32_t> root_label;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] == 0) {
      ++out.sizes[0];
      continue;
    }
    const std::uint32_t root = sets.find(provisional[i] - 1);
    if (root >= root_label.size()) root_label.resize(root + 1, 0);
    if (root_label[root] == 0) {
      out.sizes.push_back(0);
      root_label[root] = static_cast<std::int32_t>(out.sizes.size() - 1);
    }
    const std::int32_t label = root_label[root];
    out.labels[i] = label;
    ++out.sizes[static_cast<std::size_t>(label)];
  }
  out.K = out.sizes.size() - 1;
  return out;
}

/// Diameter of the sphere whose volume equals `component_size` voxels at `spacing`.
inline double equivalent_diameter(std::size_t component_size, const Spacing& spacing) {
  detail::require(component_size >= 1, "component size must be >= 1");
  const double volume = static_cast<double>(component_size) * spacing.voxel_volume();
  return 2.0 * std::cbrt(3.0 * volume / (4.0 * std::numbers::pi));
}

/// Equivalent diameters of lesions 1..K, in label order.
inline std::vector<double> lesion_diameters(const ComponentSet& cs) {
  std::vector<double> out;
  out.reserve(cs.K);
  for (std::size_t k = 1; k <= cs.K; ++k) out.push_back(equivalent_diameter(cs.sizes[k], cs.labels.spacing()));
  return out;
}

}  // namespace iwseg
