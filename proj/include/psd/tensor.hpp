#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "psd/image.hpp"

namespace psd {

/// Dense NCHW float32 tensor. Every tensor in the network code is 4-D;
/// per-image scalars are (N, 1, 1, 1).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, float fill = 0.0f);

  int n() const noexcept { return shape_[0]; }
  int c() const noexcept { return shape_[1]; }
  int h() const noexcept { return shape_[2]; }
  int w() const noexcept { return shape_[3]; }
  const std::array<int, 4>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> span() noexcept { return data_; }
  std::span<const float> span() const noexcept { return data_; }

  // Pointer to the (h, w) plane of sample i, channel ch.
  float* plane(int i, int ch) noexcept { return data_.data() + plane_offset(i, ch); }
  const float* plane(int i, int ch) const noexcept { return data_.data() + plane_offset(i, ch); }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(float v);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t plane_offset(int i, int ch) const noexcept {
    return (static_cast<std::size_t>(i) * shape_[1] + ch) * shape_[2] * shape_[3];
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

// Stack same-shaped images into (N, 1, H, W). Throws ShapeError on mismatch.
Tensor stack(std::span<const Image> images);
Tensor stack(const Image& image);
// Inverse of stack for single-channel tensors.
std::vector<Image> unstack(const Tensor& batch);
Image to_image(const Tensor& batch, int index);

}  // namespace psd
