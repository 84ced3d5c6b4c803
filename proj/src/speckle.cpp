#include "psd/speckle.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "psd/error.hpp"
#include "psd/random.hpp"

namespace psd {

SpeckleField sample_speckle_field(int width, int height, LookCount looks, std::uint64_t seed) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("speckle field dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  SpeckleField field;
  field.width = width;
  field.height = height;
  field.looks = looks;
  field.seed = seed;
  field.values.resize(static_cast<std::size_t>(width) * height);

  Philox rng(seed);
  const double shape = looks.value();
  const double scale = 1.0 / shape;
  constexpr float kTiny = std::numeric_limits<float>::min();
  for (float& v : field.values) {
    v = std::max(static_cast<float>(rng.gamma(shape) * scale), kTiny);
  }
  return field;
}

Image apply_speckle(const Image& clean, const SpeckleField& field) {
  if (clean.width() != field.width || clean.height() != field.height) {
    throw InvalidArgument("speckle field is " + std::to_string(field.width) + "x" + std::to_string(field.height) +
                          " but image is " + std::to_string(clean.width()) + "x" + std::to_string(clean.height()));
  }
  Image out = clean;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] *= field.values[i];
  return out;
}

Image speckle(const Image& clean, LookCount looks, std::uint64_t seed) {
  return apply_speckle(clean, sample_speckle_field(clean.width(), clean.height(), looks, seed));
}

S2SPair make_s2s_pair(const Image& base, LookCount looks, std::uint64_t seed1, std::uint64_t seed2) {
  if (seed1 == seed2) {
    throw InvalidArgument("S2S pair needs two distinct speckle seeds");
  }
  S2SPair pair;
  pair.first = speckle(base, looks, seed1);
  pair.second = speckle(base, looks, seed2);
  pair.base = base;
  pair.looks = looks;
  pair.seed1 = seed1;
  pair.seed2 = seed2;
  pair.base_hash = content_hash(base);
  return pair;
}

}  // namespace psd
