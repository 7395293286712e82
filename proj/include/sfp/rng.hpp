#pragma once

#include <cstdint>
#include <random>

namespace sfp {

// Portable random stream. The engine is std::mt19937_64 (fully specified by
// the standard); the integer and normal draws are implemented here because
// the std distributions differ between standard library vendors, and
// instance files must be reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1).
  double uniform();

  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 mixing of (seed, stream); used to give every instance, episode
// and worker an independent, order-free seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sfp
