#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace limiam {

/// Engine used for every random draw in the library.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of keys,
/// e.g. derive_seed(base, {replication, column}). Distinct key paths give
/// unrelated seeds; the same path always gives the same seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x3c6ef372fe94f82bULL));
  return h;
}

inline Rng make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(base, keys));
}

/// FNV-1a over raw bytes, used for dataset checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace limiam
