#include "psd/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "psd/error.hpp"

namespace psd {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("pixel buffer holds " + std::to_string(pixels_.size()) + " values, expected " +
                          std::to_string(static_cast<std::size_t>(width) * height));
  }
}

bool Image::is_valid_intensity() const noexcept {
  return std::all_of(pixels_.begin(), pixels_.end(), [](float v) { return std::isfinite(v) && v >= 0.0f; });
}

LookCount::LookCount(double looks) : looks_(looks) {
  if (!(looks > 0.0) || !std::isfinite(looks)) {
    throw InvalidArgument("number of looks must be positive and finite, got " + std::to_string(looks));
  }
}

Image clamp(const Image& image, float lo, float hi) {
  Image out = image;
  for (float& v : out.pixels()) v = std::clamp(v, lo, hi);
  return out;
}

Image crop(const Image& image, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || width < 1 || height < 1 || x + width > image.width() || y + height > image.height()) {
    throw InvalidArgument("crop window outside image");
  }
  Image out(width, height);
  for (int r = 0; r < height; ++r) {
    std::memcpy(out.pixels().data() + static_cast<std::size_t>(r) * width,
                image.pixels().data() + static_cast<std::size_t>(y + r) * image.width() + x, sizeof(float) * width);
  }
  return out;
}

std::uint64_t content_hash(const Image& image) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int dims[2] = {image.width(), image.height()};
  mix(dims, sizeof(dims));
  mix(image.pixels().data(), image.pixels().size_bytes());
  return h;
}

}  // namespace psd
