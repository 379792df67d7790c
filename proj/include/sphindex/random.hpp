#pragma once

#include <cstdint>
#include <random>

namespace sphindex {

using Rng = std::mt19937_64;

// Derives an independent child seed for stream `index` of a parent seed, so
// replications can be scheduled on any number of workers and still draw the
// same numbers.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  // splitmix64 finaliser applied to a golden-ratio stride.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(split_seed(seed, stream));
}

}  // namespace sphindex
