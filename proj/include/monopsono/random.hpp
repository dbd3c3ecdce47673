#pragma once

#include <cstdint>

namespace monopsono {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream r derived from the master seed only, so parallel workers
/// reproduce the serial result.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t r) {
  return splitmix64(seed ^ splitmix64(r + 1));
}

}  // namespace monopsono
