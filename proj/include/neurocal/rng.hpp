#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace neurocal {

// splitmix64 finalizer; the basis of the counter-based streams below.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tags(std::uint64_t seed, std::uint64_t a,
                               std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed ^ 0x2545f4914f6cdd1dull);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

// Counter-based uniform in [0,1). Bit-reproducible regardless of thread
// schedule, which is what keeps the simulator deterministic under OpenMP.
inline double u01_at(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
  return (hash_tags(seed, a, b, c) >> 11) * 0x1.0p-53;
}

// Counter-based standard normal (Box-Muller, cosine branch).
inline double normal_at(std::uint64_t seed, std::uint64_t a,
                        std::uint64_t b = 0, std::uint64_t c = 0) {
  double u1 = u01_at(seed, a, b, c);
  double u2 = u01_at(seed ^ 0x5851f42d4c957f2dull, a, b, c);
  if (u1 <= 0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Independent engine for a named stream (per neuron, per sweep, ...).
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::mt19937_64(hash_tags(seed, a, b, c));
}

}  // namespace neurocal
