#pragma once

#include <concepts>
#include <cstdint>
#include <limits>
#include <random>

namespace pbl {

/// Unbiased draw from [0, n) for a full-range 64-bit generator. Used instead
/// of std::uniform_int_distribution so seeded runs reproduce across standard
/// libraries.
template <std::uniform_random_bit_generator G>
  requires(G::min() == 0 && G::max() == std::numeric_limits<std::uint64_t>::max())
std::uint64_t uniform_below(G& gen, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = gen();
    if (x >= threshold) return x % n;
  }
}

/// 64-bit generator backed by the OS CSPRNG.
class SystemEntropy {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }
  result_type operator()();
};

}  // namespace pbl
