#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace psd {

/// Single-band intensity grid, row-major (pixel (x, y) at y * width + x).
///
/// Images that enter the pipeline from disk or from the speckle model are
/// non-negative and finite; intermediate network outputs may be negative,
/// so the type itself does not enforce the intensity invariant. Use
/// `is_valid_intensity()` at boundaries.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);
  Image(int width, int height, std::vector<float> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  float& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> pixels() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  // Finite and >= 0 everywhere.
  bool is_valid_intensity() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

/// Strong type for the number of looks of a speckle process.
class LookCount {
 public:
  explicit LookCount(double looks);
  double value() const noexcept { return looks_; }
  friend bool operator==(LookCount, LookCount) = default;

 private:
  double looks_;
};

Image clamp(const Image& image, float lo, float hi);
Image crop(const Image& image, int x, int y, int width, int height);

// FNV-1a over the raw float bytes; used to record pair provenance.
std::uint64_t content_hash(const Image& image);

}  // namespace psd
