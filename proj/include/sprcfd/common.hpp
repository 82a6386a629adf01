#pragma once

#include <array>
#include <cstdint>
#include <numbers>

namespace sprcfd {

inline constexpr int kBlades = 3;

// One value per blade, blade 1 at index 0.
using Triple = std::array<double, kBlades>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent RNG streams from one user seed (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t kPlantNoise = 1;
inline constexpr std::uint64_t kPitchNoise = 2;
inline constexpr std::uint64_t kPrbs = 3;
}  // namespace streams

}  // namespace sprcfd
