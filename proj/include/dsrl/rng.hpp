#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace dsrl {

// Counter-based randomness: every draw is a pure function of a key tuple
// such as (seed, step, prompt, rollout, token). Workers can therefore
// sample in any order and still reproduce the same stream.
namespace rng {

constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::initializer_list<std::uint64_t> key) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t k : key) h = mix(h ^ mix(k));
  return h;
}

// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double uniform(std::initializer_list<std::uint64_t> key) noexcept {
  return to_unit(hash(key));
}

// Standard normal via Box-Muller over two derived counters.
inline double normal(std::uint64_t seed, std::uint64_t index) noexcept {
  const double u1 = 1.0 - to_unit(hash({seed, index, 0}));  // (0, 1]
  const double u2 = to_unit(hash({seed, index, 1}));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng
}  // namespace dsrl
