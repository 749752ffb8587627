#pragma once

#include <cstdint>
#include <span>

// Counter-based random streams: every draw is a pure function of a key, so
// values never depend on enumeration order or thread scheduling.
namespace breather::rng {

// SplitMix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value) {
  return mix(key ^ mix(value + 0x632be59bd9b4e019ULL));
}

/// Seed for the i-th independent sample of a run.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return combine(mix(base), index);
}

/// Key of the stream attached to lattice site j under a seed.
inline std::uint64_t site_key(std::uint64_t seed, std::span<const int> site) {
  std::uint64_t key = mix(seed ^ 0x5851f42d4c957f2dULL);
  for (int c : site) key = combine(key, static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
  return key;
}

/// Uniform double in [0, 1) from the 53 high bits of the k-th counter of a stream.
constexpr double uniform(std::uint64_t key, std::uint64_t counter = 0) {
  return static_cast<double>(combine(key, counter) >> 11) * 0x1.0p-53;
}

}  // namespace breather::rng
