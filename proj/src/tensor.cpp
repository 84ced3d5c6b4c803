#include "psd/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "psd/error.hpp"

namespace psd {

Tensor::Tensor(int n, int c, int h, int w, float fill) : shape_{n, c, h, w} {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw InvalidArgument("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  return "(" + std::to_string(shape_[0]) + ", " + std::to_string(shape_[1]) + ", " + std::to_string(shape_[2]) +
         ", " + std::to_string(shape_[3]) + ")";
}

Tensor stack(std::span<const Image> images) {
  if (images.empty()) throw InvalidArgument("cannot stack an empty image list");
  const int w = images.front().width();
  const int h = images.front().height();
  Tensor out(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() != w || images[i].height() != h) {
      throw ShapeError("image " + std::to_string(i) + " is " + std::to_string(images[i].width()) + "x" +
                       std::to_string(images[i].height()) + ", batch expects " + std::to_string(w) + "x" +
                       std::to_string(h));
    }
    std::memcpy(out.plane(static_cast<int>(i), 0), images[i].pixels().data(), images[i].pixels().size_bytes());
  }
  return out;
}

Tensor stack(const Image& image) { return stack(std::span<const Image>(&image, 1)); }

Image to_image(const Tensor& batch, int index) {
  if (batch.c() != 1) throw ShapeError("expected a single-channel tensor, got " + batch.shape_string());
  const float* p = batch.plane(index, 0);
  return Image(batch.w(), batch.h(), std::vector<float>(p, p + static_cast<std::size_t>(batch.h()) * batch.w()));
}

std::vector<Image> unstack(const Tensor& batch) {
  std::vector<Image> out;
  out.reserve(batch.n());
  for (int i = 0; i < batch.n(); ++i) out.push_back(to_image(batch, i));
  return out;
}

}  // namespace psd
