#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vdn {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; only used to turn stream labels into seed salts.
constexpr std::uint64_t label_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Child seed for an independent stream: one root seed fans out into named
// subsystems ("data", "init", "noise") and then into per-item indices.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ label_hash(label)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace vdn
