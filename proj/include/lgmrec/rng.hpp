#pragma once

#include <cstdint>
#include <random>

namespace lgmrec {

using Rng = std::mt19937_64;

/// Independent streams derived from one master seed, so toggling one stochastic
/// feature leaves the draws of the others untouched.
enum class Stream : std::uint64_t {
  kInit = 1,
  kSampling = 2,
  kDropout = 3,
  kGumbel = 4,
  kSplit = 5,
  kGenerate = 6,
  kDiagnostic = 7,
};

inline Rng make_stream(std::uint64_t seed, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform in the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace lgmrec
