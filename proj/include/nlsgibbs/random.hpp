#pragma once

#include <cstdint>
#include <random>

namespace nlsgibbs {

/// splitmix64 finalizer, used to decorrelate (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for sample `index` of the run seeded with `seed`.
/// Streams depend only on (seed, index), so any partition of samples over
/// workers reproduces the same draws.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(a ^ mix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace nlsgibbs
