#pragma once

#include <cstdint>

namespace polydepth {

/// Counter-based generator: value i of stream (seed, stream) is a pure function
/// of its arguments, so results never depend on call order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t i) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) + i);
}

/// Uniform double in [0, 1) from 53 random bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t i) {
  return static_cast<double>(counter_hash(seed, stream, i) >> 11) * 0x1.0p-53;
}

}  // namespace polydepth
