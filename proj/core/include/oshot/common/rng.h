#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oshot {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a.
std::uint64_t hash_string(std::string_view s);

// Seed of the named substream `stream` of `root`, optionally indexed. All
// randomness in the pipeline flows through this so that every consumer
// (data, init, augmentation, rotation-draw) is reproducible on its own.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

// Uniform double in [lo, hi).
double uniform(Rng& rng, double lo, double hi);
// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);
double normal(Rng& rng, double mean, double stddev);

}  // namespace oshot
