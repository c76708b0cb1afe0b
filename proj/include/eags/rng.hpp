#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eags {

// Seeded random stream. Every consumer of randomness derives its own stream
// from the run seed plus a name and an index, so that work split across
// threads draws exactly the numbers it would draw serially.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; exposed for seed derivation in tools and tests.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace eags
