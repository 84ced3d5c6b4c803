#pragma once

#include <array>
#include <cstdint>

namespace psd {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the Philox key and the 128-bit counter starts at zero,
/// so two different seeds index two different keyed permutations of the same
/// counter space. Streams for distinct seeds never share state.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Gamma(shape, 1) by Marsaglia and Tsang; shape < 1 is boosted through
  // Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

// SplitMix64 finaliser over (seed, tag, index). Used to derive per-step and
// per-pair seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0);

}  // namespace psd
