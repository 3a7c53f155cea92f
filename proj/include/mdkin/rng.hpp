#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace mdkin {

using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a master seed. Streams with
/// different ids are seeded through distinct seed_seq inputs.
inline Rng split_stream(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x6d646b6eu};
  return Rng{seq};
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <class Urbg>
double uniform01(Urbg& rng) {
  return uniform01(static_cast<std::uint64_t>(rng()));
}

/// Index in [0, n) by 64x64 -> 128 multiply-shift. Bias is at most n / 2^64.
template <class Urbg>
std::size_t uniform_index(Urbg& rng, std::size_t n) {
  const auto wide = static_cast<unsigned __int128>(static_cast<std::uint64_t>(rng())) *
                    static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

}  // namespace mdkin
