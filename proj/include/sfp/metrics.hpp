#pragma once

#include <span>
#include <string>
#include <vector>

namespace sfp {

// Episode-length statistics for one solver over one instance set. Failed
// episodes enter at the cap value; std is the population std (divide by N).
struct EpisodeStats {
  int episodes = 0;
  double ep_len_mean = 0.0;
  double ep_len_std = 0.0;
  double ep_len_max = 0.0;
  double q90 = 0.0;
  double q10 = 0.0;
  double success_rate = 0.0;  // fraction with length < cap
};

// Linear interpolation between order statistics (position q * (N - 1)).
// `sorted` must be ascending and nonempty.
double quantile_linear(std::span<const double> sorted, double q);

// Throws DataError on an empty input.
EpisodeStats summarize_lengths(std::span<const int> lengths, int cap);

}  // namespace sfp
