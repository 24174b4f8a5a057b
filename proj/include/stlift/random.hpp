#pragma once

#include <cstdint>
#include <random>

namespace stlift {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent stream for (seed, purpose, index); results never depend on the
/// order in which streams are created.
inline std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t purpose,
                                      std::uint64_t index = 0) {
  return std::mt19937_64(mix64(mix64(mix64(seed) ^ purpose) ^ index));
}

// Stream purposes.
inline constexpr std::uint64_t kStreamSignal = 0x5167;
inline constexpr std::uint64_t kStreamNoise = 0x4e01;
inline constexpr std::uint64_t kStreamGriffinLim = 0x61b0;
inline constexpr std::uint64_t kStreamStepProbe = 0x57e9;

}  // namespace stlift
