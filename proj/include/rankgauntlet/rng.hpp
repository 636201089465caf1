#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rankgauntlet {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a seed from a base seed and a tuple of stream identifiers
// (client id, round, purpose tag, ...). Order of parts matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

// Purpose tags for derive_seed so that streams never collide.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kSelect = 3;
inline constexpr std::uint64_t kPartition = 4;
inline constexpr std::uint64_t kData = 5;
inline constexpr std::uint64_t kAttack = 6;
inline constexpr std::uint64_t kDefense = 7;
}  // namespace stream

}  // namespace rankgauntlet
