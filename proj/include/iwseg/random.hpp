#pragma once

// Portable draws on top of std::mt19937_64, whose output sequence is fixed by
// the standard. The std distributions are implementation-defined, so bounded
// integers and unit reals are derived here to keep seeds reproducible across
// standard libraries.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace iwseg {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Requires n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

/// Uniform integer in [lo, hi].
inline std::int64_t uniform_between(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// `k` distinct indices from [0, n), in ascending order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// `k` indices drawn from [0, n) with replacement, ascending.
inline std::vector<std::size_t> sample_with_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(k);
  for (auto& v : out) v = static_cast<std::size_t>(uniform_index(rng, n));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace iwseg
