#pragma once

#include <cstdint>

namespace drywall {

// Counter-based generator: the n-th draw is splitmix64(seed + n * golden).
// Output depends only on (seed, counter), so streams are reproducible across
// platforms and standard library implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; consumes two draws.
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a parent seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace drywall
