#include "drywall/rng.hpp"

#include <cmath>
#include <numbers>

namespace drywall {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(seed_ + (counter_++) * kGolden);
}

double CounterRng::uniform01() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Lemire-style rejection keeps the result unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % n;
}

double CounterRng::normal() {
  double u1 = uniform01();
  const double u2 = uniform01();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace drywall
