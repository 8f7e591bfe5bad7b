#pragma once

#include <cstdint>
#include <random>

namespace cde {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent seed streams derived from a master seed. Used so that
// per-replicate / per-fold work items get stable seeds regardless of
// execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ splitmix64(a + 0x1ULL));
  s = splitmix64(s ^ splitmix64(b + 0x2ULL));
  s = splitmix64(s ^ splitmix64(c + 0x3ULL));
  return s;
}

}  // namespace cde
