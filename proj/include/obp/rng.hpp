#pragma once

#include <cstdint>
#include <random>

namespace obp {

// splitmix64 finalizer, used to derive independent per-unit seeds from
// (base seed, unit index) so parallel schedules cannot change results.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed ^ mix_seed(stream)));
}

}  // namespace obp
