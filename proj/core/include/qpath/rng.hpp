#pragma once

#include <cstdint>
#include <random>
#include <string_view>

// Deterministic stream derivation: every worker (chain, trajectory, window)
// gets its own engine seeded from (master seed, stream index, purpose tag),
// so results do not depend on scheduling or thread count.

namespace qpath::rng {

using Engine = std::mt19937_64;

// splitmix64 finalizer; good avalanche, stable across platforms.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::string_view tag = {}) {
  return mix(mix(master) ^ mix(stream * 0x9e3779b97f4a7c15ull + 1) ^ fnv1a(tag));
}

inline Engine make_stream(std::uint64_t master, std::uint64_t stream, std::string_view tag = {}) {
  return Engine(derive_seed(master, stream, tag));
}

// A fresh distribution per call: normal_distribution caches a spare variate,
// and a shared cache would entangle otherwise independent streams.
inline double normal(Engine& eng) {
  return std::normal_distribution<double>(0.0, 1.0)(eng);
}

inline double uniform(Engine& eng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

// Uniform integer in [0, n).
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng);
}

}  // namespace qpath::rng
