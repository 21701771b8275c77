#pragma once

#include <cstdint>
#include <random>

namespace imle {

// Independent PRNG streams. Each component draws from its own stream so that
// it can be replayed in isolation (e.g. the latents for epoch 7, demo 3).
enum class Stream : std::uint32_t {
  kInit = 1,
  kShuffle = 2,
  kLatents = 3,
  kData = 4,
  kEpisode = 5,
  kPolicy = 6,
  kSubset = 7,
  kJitter = 8,
  kProbe = 9,
};

// Seeded 64-bit generator: std::mt19937_64 keyed through std::seed_seq with
// the words (seed_lo, seed_hi, stream, index_lo, index_hi, sub_lo, sub_hi).
// The engine output is fully specified by the standard; the distribution
// adaptors are whatever the linked standard library provides, so results are
// reproducible per toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng ForStream(std::uint64_t seed, Stream stream,
                       std::uint64_t index = 0, std::uint64_t sub = 0);

  double Normal();
  // Uniform in [lo, hi).
  double Uniform(double lo = 0.0, double hi = 1.0);
  // Uniform integer in [0, n). n must be > 0.
  std::size_t Index(std::size_t n);
  bool Bernoulli(double p);

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit Rng(std::seed_seq& seq);

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace imle
