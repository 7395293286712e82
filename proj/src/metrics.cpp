#include "sfp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sfp/errors.hpp"

namespace sfp {

double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

EpisodeStats summarize_lengths(std::span<const int> lengths, int cap) {
  if (lengths.empty()) throw DataError("no episodes to summarize");
  std::vector<double> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());

  EpisodeStats s;
  s.episodes = static_cast<int>(sorted.size());
  double sum = 0.0;
  int successes = 0;
  for (double v : sorted) {
    sum += v;
    successes += v < cap ? 1 : 0;
  }
  s.ep_len_mean = sum / s.episodes;
  double sq = 0.0;
  for (double v : sorted) sq += (v - s.ep_len_mean) * (v - s.ep_len_mean);
  s.ep_len_std = std::sqrt(sq / s.episodes);
  s.ep_len_max = sorted.back();
  s.q90 = quantile_linear(sorted, 0.9);
  s.q10 = quantile_linear(sorted, 0.1);
  s.success_rate = static_cast<double>(successes) / s.episodes;
  return s;
}

}  // namespace sfp
