#pragma once

#include <cstdint>
#include <random>

namespace ksat {

/// Name of the pseudo-random engine backing every seeded draw. Changing it
/// changes every generated suite, so it is recorded in suite metadata.
inline constexpr const char *kRngAlgorithm = "mt19937_64+splitmix64";

/// SplitMix64 finalizer, used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

/// Seeded generator with draws defined only in terms of raw engine output,
/// so sequences are identical across standard library implementations
/// (std::*_distribution makes no such guarantee).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound), bound >= 1, by rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 engine_;
};

} // namespace ksat
