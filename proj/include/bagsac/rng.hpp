#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace bagsac {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic seed for a named sub-stream, e.g. derive_seed(42, "env") or
/// derive_seed(42, "ensemble_member", {3}).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name,
                                 std::initializer_list<std::uint64_t> extra = {}) {
  std::uint64_t h = splitmix64(base ^ fnv1a(name));
  for (std::uint64_t e : extra) h = splitmix64(h ^ splitmix64(e + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t base, std::string_view name,
                       std::initializer_list<std::uint64_t> extra = {}) {
  return Rng(derive_seed(base, name, extra));
}

}  // namespace bagsac
