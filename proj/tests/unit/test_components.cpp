#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "iwseg/components.hpp"

namespace iwseg {
namespace {

using testing::bfs_labels;
using testing::partition_of;

TEST(Components, EmptyMaskIsAllBackground) {
  const auto cs = label_components(Mask(Shape{3, 4, 5}));
  EXPECT_EQ(cs.K, 0u);
  EXPECT_EQ(cs.sizes, (std::vector<std::size_t>{60}));
}

TEST(Components, SingleVoxel) {
  Mask m(Shape{3, 3, 3});
  m(1, 1, 1) = 1;
  const auto cs = label_components(m);
  EXPECT_EQ(cs.K, 1u);
  EXPECT_EQ(cs.sizes, (std::vector<std::size_t>{26, 1}));
  EXPECT_EQ(cs.labels(1, 1, 1), 1);
}

TEST(Components, DiagonalNeighborsDependOnConnectivity) {
  Mask m(Shape{2, 2, 2});
  m(0, 0, 0) = m(1, 1, 1) = 1;
  EXPECT_EQ(label_components(m, Connectivity::vertex).sizes, (std::vector<std::size_t>{6, 2}));
  EXPECT_EQ(label_components(m, Connectivity::edge).sizes, (std::vector<std::size_t>{6, 1, 1}));
  EXPECT_EQ(label_components(m, Connectivity::face).sizes, (std::vector<std::size_t>{6, 1, 1}));

  Mask e(Shape{1, 2, 2});
  e(0, 0, 0) = e(0, 1, 1) = 1;  // share an edge
  EXPECT_EQ(label_components(e, Connectivity::edge).K, 1u);
  EXPECT_EQ(label_components(e, Connectivity::face).K, 2u);
}

TEST(Components, LabelsFollowScanOrder) {
  // A U shape whose right arm starts earlier in scan order than the join.
  Mask m(Shape{1, 3, 5});
  m(0, 0, 4) = 1;
  m(0, 0, 0) = m(0, 1, 0) = m(0, 2, 0) = m(0, 2, 1) = m(0, 2, 2) = m(0, 2, 3) = m(0, 2, 4) = m(0, 1, 4) = 1;
  m(0, 0, 2) = 1;  // isolated
  const auto cs = label_components(m, Connectivity::face);
  EXPECT_EQ(cs.K, 2u);
  EXPECT_EQ(cs.labels(0, 0, 0), 1);
  EXPECT_EQ(cs.labels(0, 0, 4), 1);
  EXPECT_EQ(cs.labels(0, 0, 2), 2);
}

TEST(Components, RejectsNonBinaryMask) {
  Mask m(Shape{1, 1, 2});
  m[0] = 2;
  EXPECT_THROW(label_components(m), ValidationError);
  EXPECT_THROW(parse_connectivity(8), ValidationError);
}

TEST(Components, MatchesFloodFillOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Mask m = testing::random_mask(rng, testing::random_shape(rng, 8), dens(rng));
    for (int c : {6, 18, 26}) {
      const auto cs = label_components(m, parse_connectivity(c));
      int k = 0;
      const auto oracle = bfs_labels(m, c, &k);
      ASSERT_EQ(cs.K, static_cast<std::size_t>(k));
      // Both label in first-encounter order, so labels agree one to one.
      for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(cs.labels[i], oracle[i]);
      ASSERT_EQ(std::accumulate(cs.sizes.begin(), cs.sizes.end(), std::size_t{0}), m.size());
      for (std::size_t j = 1; j <= cs.K; ++j) ASSERT_GT(cs.sizes[j], 0u);
    }
  }
}

TEST(Components, PartitionIsInvariantUnderAxisPermutation) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Mask m = testing::random_mask(rng, testing::random_shape(rng, 7), 0.4);
    const Shape s = m.shape();
    Mask t(Shape{s.x, s.z, s.y});  // (z,y,x) -> (x,z,y)
    std::vector<std::size_t> to_t(m.size());
    for (std::size_t z = 0; z < s.z; ++z)
      for (std::size_t y = 0; y < s.y; ++y)
        for (std::size_t x = 0; x < s.x; ++x) {
          t(x, z, y) = m(z, y, x);
          to_t[m.index(z, y, x)] = t.index(x, z, y);
        }
    for (auto c : {Connectivity::face, Connectivity::edge, Connectivity::vertex}) {
      const auto a = label_components(m, c);
      const auto b = label_components(t, c);
      std::vector<std::int32_t> pulled(m.size());
      for (std::size_t i = 0; i < m.size(); ++i) pulled[i] = b.labels[to_t[i]];
      ASSERT_EQ(partition_of(a.labels.data(), m.size()), partition_of(pulled, m.size()));
    }
  }
}

TEST(EquivalentDiameter, ClosedForms) {
  EXPECT_NEAR(equivalent_diameter(1, {}), std::cbrt(6.0 / std::numbers::pi), 1e-12);
  EXPECT_NEAR(equivalent_diameter(1, {}), 1.2407, 1e-4);
  EXPECT_NEAR(equivalent_diameter(33510, {}), 40.0, 1e-3);
  EXPECT_NEAR(equivalent_diameter(8, Spacing{2, 2, 2}), 2.0 * equivalent_diameter(8, {}), 1e-12);
  EXPECT_THROW(equivalent_diameter(0, {}), ValidationError);
}

}  // namespace
}  // namespace iwseg
