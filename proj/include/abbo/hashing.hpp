#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace abbo {

/// SplitMix64 finalizer; stable across platforms, unlike std::hash.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hashKey(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Uniform value in [0, 1) derived from a hash.
constexpr double hashUnit(std::uint64_t h) noexcept {
  return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

/// Uniform value in [-1, 1).
constexpr double hashSigned(std::uint64_t h) noexcept { return 2.0 * hashUnit(h) - 1.0; }

/// Standard normal value from a hash (Box-Muller on two derived uniforms).
inline double hashNormal(std::uint64_t h) noexcept {
  const double u1 = 1.0 - hashUnit(h);
  const double u2 = hashUnit(h ^ 0x5851f42d4c957f2dULL);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace abbo
