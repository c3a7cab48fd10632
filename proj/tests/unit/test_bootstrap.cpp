#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "iwseg/bootstrap.hpp"
#include "iwseg/random.hpp"

namespace iwseg {
namespace {

std::optional<double> mean_index(std::span<const std::size_t> s) {
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

TEST(Bootstrap, SampleSizeRoundsUp) {
  EXPECT_EQ(bootstrap_sample_size(10, 0.8), 8u);
  EXPECT_EQ(bootstrap_sample_size(11, 0.8), 9u);
  EXPECT_EQ(bootstrap_sample_size(2, 0.8), 2u);
  EXPECT_EQ(bootstrap_sample_size(5, 1.0), 5u);
  EXPECT_EQ(bootstrap_sample_size(100, 0.01), 1u);
}

TEST(Bootstrap, FixedSeedIsReproducible) {
  BootstrapConfig c;
  c.seed = 17;
  const auto a = bootstrap_summary(20, mean_index, c);
  const auto b = bootstrap_summary(20, mean_index, c);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
  EXPECT_GT(a.std, 0.0);
  c.seed = 18;
  EXPECT_NE(bootstrap_summary(20, mean_index, c).mean, a.mean);
}

TEST(Bootstrap, ConstantMetricGivesConstantForEverySeed) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BootstrapConfig c;
    c.seed = seed;
    const auto s = bootstrap_summary(7, [](auto) { return std::optional<double>(0.1); }, c);
    EXPECT_EQ(s.mean, 0.1);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_EQ(s.n_used, 100u);
  }
}

TEST(Bootstrap, SamplesAreDistinctSortedIndicesWithoutReplacement) {
  BootstrapConfig c;
  c.n_iter = 50;
  bootstrap_summary(
      10,
      [](std::span<const std::size_t> s) {
        EXPECT_EQ(s.size(), 8u);
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), s.size());
        for (auto i : s) EXPECT_LT(i, 10u);
        return std::optional<double>(1.0);
      },
      c);
}

TEST(Bootstrap, UndefinedIterationsAreSkipped) {
  BootstrapConfig c;
  c.n_iter = 40;
  // Defined only when patient 0 is drawn.
  const auto s = bootstrap_summary(
      5, [](std::span<const std::size_t> v) { return v.front() == 0 ? std::optional<double>(2.0) : std::nullopt; }, c);
  EXPECT_GT(s.n_used, 0u);
  EXPECT_LT(s.n_used, 40u);
  EXPECT_EQ(s.mean, 2.0);
  const auto none = bootstrap_summary(5, [](auto) { return std::optional<double>(); }, c);
  EXPECT_EQ(none.n_used, 0u);
  EXPECT_TRUE(std::isnan(none.mean));
}

TEST(Bootstrap, Preconditions) {
  BootstrapConfig c;
  EXPECT_THROW(bootstrap_summary(1, mean_index, c), ValidationError);
  c.frac = 0;
  EXPECT_THROW(bootstrap_summary(5, mean_index, c), ValidationError);
  c.frac = 1.2;
  EXPECT_THROW(bootstrap_summary(5, mean_index, c), ValidationError);
}

TEST(Random, UniformIndexStaysInRangeAndCoversIt) {
  Rng rng(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[uniform_index(rng, 7)];
  for (int h : hits) EXPECT_GT(h, 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_unit(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace iwseg
