#pragma once

#include <cstdint>
#include <vector>

#include "psd/image.hpp"

namespace psd {

/// One realization of unit-mean gamma speckle with a given number of looks.
struct SpeckleField {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  LookCount looks{1.0};
  std::uint64_t seed = 0;
};

/// Two speckled views of one shared base image.
struct S2SPair {
  Image first;
  Image second;
  Image base;
  LookCount looks{1.0};
  std::uint64_t seed1 = 0;
  std::uint64_t seed2 = 0;
  // content_hash(base), recorded so later stages can verify where the base came from.
  std::uint64_t base_hash = 0;
};

// i.i.d. Gamma(L, 1/L) draws. Same arguments give a bit-identical field.
SpeckleField sample_speckle_field(int width, int height, LookCount looks, std::uint64_t seed);

// Hadamard product clean * field. Values are not clipped.
Image apply_speckle(const Image& clean, const SpeckleField& field);

// Convenience: sample then apply.
Image speckle(const Image& clean, LookCount looks, std::uint64_t seed);

S2SPair make_s2s_pair(const Image& base, LookCount looks, std::uint64_t seed1, std::uint64_t seed2);

}  // namespace psd
