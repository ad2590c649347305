#pragma once

/**
 * Seeded random source and stable seed derivation.
 *
 * Draws are derived from the raw 64-bit engine output with explicit bit
 * manipulation rather than std:: distributions, whose algorithms are
 * implementation-defined; the same seed yields the same stream on every
 * standard library.
 */

#include <cstdint>
#include <random>
#include <string_view>

namespace decodecal {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// FNV-1a over bytes, finished with a splitmix64 mix.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

// Child seed for one (master seed, strategy encoding, instance id) task.
std::uint64_t derive_seed(std::uint64_t master, std::string_view strategy,
                          std::string_view instance_id);

}  // namespace decodecal
