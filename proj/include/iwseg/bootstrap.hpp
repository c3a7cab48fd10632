#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "iwseg/error.hpp"
#include "iwseg/random.hpp"

namespace iwseg {

struct BootstrapConfig {
  std::size_t n_iter = 100;
  double frac = 0.8;
  std::uint64_t seed = 0;
  bool with_replacement = false;
};

/// Mean and population standard deviation over the iterations whose metric
/// was defined. Both are NaN when no iteration produced a value.
struct BootstrapSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_used = 0;
};

/// Metric over a resampled cohort, given as ascending patient indices.
/// Returning nullopt drops the iteration (e.g. no lesions were drawn).
using BootstrapMetric = std::function<std::optional<double>(std::span<const std::size_t>)>;

inline std::size_t bootstrap_sample_size(std::size_t n_patients, double frac) {
  // The epsilon keeps 0.8 * 10 from rounding up to 9.
  const auto k = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n_patients) - 1e-9));
  return std::max<std::size_t>(k, 1);
}

/// Iteration i draws ceil(frac * n) patients with its own generator seeded
/// `seed + i`, so any iteration can be replayed alone.
inline BootstrapSummary bootstrap_summary(std::size_t n_patients, const BootstrapMetric& metric,
                                          const BootstrapConfig& config = {}) {
  detail::require(n_patients >= 2, "bootstrap needs at least 2 patients");
  detail::require(config.frac > 0 && config.frac <= 1, "bootstrap fraction must lie in (0, 1]");
  detail::require(config.n_iter >= 1, "bootstrap needs at least one iteration");
  const std::size_t k = bootstrap_sample_size(n_patients, config.frac);

  std::vector<double> values;
  values.reserve(config.n_iter);
  for (std::size_t it = 0; it < config.n_iter; ++it) {
    Rng rng(config.seed + it);
    const auto sample = config.with_replacement ? sample_with_replacement(rng, n_patients, k)
                                                : sample_without_replacement(rng, n_patients, k);
    if (auto v = metric(sample)) values.push_back(*v);
  }

  BootstrapSummary s;
  s.n_used = values.size();
  if (values.empty()) return s;
  // Shifted by the first value so identical iterations give exactly that value and std 0.
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  s.mean = shift + sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

}  // namespace iwseg
