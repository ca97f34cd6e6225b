#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ecechain {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent per-item streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic generator for (seed, stream ids...), e.g. (seed, epoch, query).
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {}) {
  std::uint64_t state = mix64(seed);
  for (auto s : streams) state = mix64(state ^ mix64(s + 0x632be59bd9b4e019ULL));
  return Rng(state);
}

}  // namespace ecechain
