#pragma once

#include <cstdint>
#include <random>

namespace dualqp {

/// Engine used everywhere a seeded stream is needed.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` under master seed `seed`:
/// splitmix64(seed ^ splitmix64(stream + 1)).
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(split_seed(seed, stream));
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
/// Used instead of std::uniform_real_distribution so sequences do not depend
/// on the standard library implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace dualqp
