#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cofa {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent substream keyed by `seed` and a path of indices,
/// e.g. derive_seed(master, {stage, replicate, tree}). Depends only on its
/// arguments, so jobs can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

/// Stage tags used when deriving substreams from a master seed.
namespace stream {
inline constexpr std::uint64_t tree = 1;
inline constexpr std::uint64_t null_permutation = 2;
inline constexpr std::uint64_t null_forest = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t cv_folds = 5;
inline constexpr std::uint64_t subsample = 6;
inline constexpr std::uint64_t observed_forest = 7;
inline constexpr std::uint64_t synthetic = 8;
inline constexpr std::uint64_t stratum = 9;
}  // namespace stream

}  // namespace cofa
