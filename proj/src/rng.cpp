#include "imle/rng.hpp"

#include "imle/errors.hpp"

namespace imle {

namespace {

std::uint32_t Lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t Hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{Lo(seed), Hi(seed)};
  engine_.seed(seq);
}

Rng::Rng(std::seed_seq& seq) { engine_.seed(seq); }

Rng Rng::ForStream(std::uint64_t seed, Stream stream, std::uint64_t index,
                   std::uint64_t sub) {
  std::seed_seq seq{Lo(seed),  Hi(seed), static_cast<std::uint32_t>(stream),
                    Lo(index), Hi(index), Lo(sub), Hi(sub)};
  return Rng(seq);
}

double Rng::Normal() { return normal_(engine_); }

double Rng::Uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

std::size_t Rng::Index(std::size_t n) {
  if (n == 0) throw PreconditionError("Rng::Index: n must be positive");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

bool Rng::Bernoulli(double p) { return Uniform() < p; }

}  // namespace imle
