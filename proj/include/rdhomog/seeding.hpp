#pragma once

#include <cstdint>

namespace rdh {

// Counter-based seeding. Every random quantity in the library is a pure
// function of (master seed, index), so realizations can be generated lazily,
// in any order and on any number of workers.
//
// The mixer is the splitmix64 finalizer (Steele, Lea, Flood 2014):
//   z += 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z ^= z >> 31
namespace seeding {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kMulA = 0xBF58476D1CE4E5B9ULL;
inline constexpr std::uint64_t kMulB = 0x94D049BB133111EBULL;

// Distinct stream tags so that, e.g., sample #3 of an ensemble and cell #3 of
// a path never share a key.
inline constexpr std::uint64_t kCellStream = 0x63656C6C00000000ULL;    // "cell"
inline constexpr std::uint64_t kSampleStream = 0x73616D7000000000ULL;  // "samp"
inline constexpr std::uint64_t kAxisStream = 0x6178697300000000ULL;    // "axis"
inline constexpr std::uint64_t kStudyStream = 0x7374756400000000ULL;   // "stud"

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += kGolden;
  z = (z ^ (z >> 30)) * kMulA;
  z = (z ^ (z >> 27)) * kMulB;
  return z ^ (z >> 31);
}

/// Stateless key derivation: two rounds so that nearby (seed, index) pairs
/// decorrelate fully.
constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::int64_t index) noexcept {
  const auto k = static_cast<std::uint64_t>(index);
  return splitmix64(splitmix64(seed ^ stream) ^ (k * kGolden));
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::uint64_t cell_key(std::uint64_t seed, std::int64_t k) noexcept {
  return mix(seed, kCellStream, k);
}

inline std::uint64_t sample_seed(std::uint64_t master, std::int64_t index) noexcept {
  return mix(master, kSampleStream, index);
}

inline std::uint64_t axis_seed(std::uint64_t seed, int axis) noexcept {
  return mix(seed, kAxisStream, axis);
}

/// Seed of realization i at truncation size N in a convergence study.
inline std::uint64_t study_seed(std::uint64_t base, std::int64_t N, std::int64_t i) noexcept {
  return sample_seed(mix(base, kStudyStream, N), i);
}

}  // namespace seeding
}  // namespace rdh
