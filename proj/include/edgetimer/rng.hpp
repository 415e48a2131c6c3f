#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace edgetimer {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent generator for a named purpose ("workload", "init",
/// "sampling", ...) from a single root seed.
inline std::mt19937_64 make_stream(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return std::mt19937_64(splitmix64(root ^ splitmix64(h)));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  auto g = make_stream(root, name);
  return g();
}

}  // namespace edgetimer
