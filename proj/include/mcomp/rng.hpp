#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mcomp {

/// Engine used for every random draw in the library. Streams are fully
/// determined by a 64-bit seed; sub-streams come from derive_seed.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used to fold purpose tags into seeds.
inline constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Sub-stream seed = hash(master, purpose tag, index).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                           std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ hash_tag(tag)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace mcomp
