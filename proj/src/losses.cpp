#include "psd/losses.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "psd/error.hpp"

namespace psd {

namespace kernels {

double tv_value(const float* p, int width, int height) {
  double total = 0.0;
  for (int h = 0; h + 1 < height; ++h) {
    const float* row = p + static_cast<std::size_t>(h) * width;
    const float* below = row + width;
    for (int w = 0; w + 1 < width; ++w) {
      const double dx = static_cast<double>(row[w + 1]) - row[w];
      const double dy = static_cast<double>(below[w]) - row[w];
      total += std::sqrt(dx * dx + dy * dy);
    }
  }
  return total;
}

void tv_gradient(const float* p, int width, int height, double scale, float* grad) {
  for (int h = 0; h + 1 < height; ++h) {
    const float* row = p + static_cast<std::size_t>(h) * width;
    const float* below = row + width;
    float* g = grad + static_cast<std::size_t>(h) * width;
    for (int w = 0; w + 1 < width; ++w) {
      const double dx = static_cast<double>(row[w + 1]) - row[w];
      const double dy = static_cast<double>(below[w]) - row[w];
      const double r = std::sqrt(dx * dx + dy * dy + kTvEpsilon);
      g[w + 1] += static_cast<float>(scale * dx / r);
      g[w + width] += static_cast<float>(scale * dy / r);
      g[w] -= static_cast<float>(scale * (dx + dy) / r);
    }
  }
}

double abs_diff_sum(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a[i]) - b[i]);
  return s;
}

double sq_diff_sum(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace kernels

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes " + a.shape_string() + " and " + b.shape_string() + " differ");
  }
  if (a.empty()) throw InvalidArgument(std::string(what) + ": empty batch");
}

double mean_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

LossValue wgan_loss(std::span<const float> critic_on_real, std::span<const float> critic_on_fake) {
  if (critic_on_real.empty() || critic_on_fake.empty()) throw InvalidArgument("wgan_loss: empty critic batch");
  LossValue out;
  out.value = mean_of(critic_on_real) - mean_of(critic_on_fake);
  out.components["wgan"] = out.value;
  return out;
}

LossValue cycle_loss(const Tensor& original, const Tensor& reconstructed) {
  require_same(original, reconstructed, "cycle_loss");
  LossValue out;
  out.value = kernels::abs_diff_sum(original.span(), reconstructed.span()) / static_cast<double>(original.size());
  out.components["cycle"] = out.value;
  return out;
}

LossValue tv_loss(const Image& image) {
  if (image.width() < 2 || image.height() < 2) {
    throw InvalidArgument("tv_loss: image must be at least 2x2, got " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()));
  }
  LossValue out;
  out.value = kernels::tv_value(image.pixels().data(), image.width(), image.height());
  out.components["tv"] = out.value;
  return out;
}

LossValue mse_loss(const Tensor& target, const Tensor& prediction) {
  require_same(target, prediction, "mse_loss");
  LossValue out;
  out.value = kernels::sq_diff_sum(target.span(), prediction.span()) / static_cast<double>(target.size());
  out.components["mse"] = out.value;
  return out;
}

LossValue generator_objective(const LossValue& wgan, const LossValue& cycle, const LossValue& tv, double alpha) {
  if (!(alpha >= 0.0)) throw InvalidArgument("generator_objective: alpha must be >= 0");
  LossValue out;
  out.components = {{"wgan", wgan.value}, {"cycle", cycle.value}, {"tv", tv.value}};
  out.weights = {{"wgan", 1.0}, {"cycle", 1.0}, {"tv", alpha}};
  out.value = wgan.value + cycle.value + alpha * tv.value;
  return out;
}

Image tv_loss_gradient(const Image& image) {
  if (image.width() < 2 || image.height() < 2) throw InvalidArgument("tv_loss_gradient: image smaller than 2x2");
  Image grad(image.width(), image.height());
  kernels::tv_gradient(image.pixels().data(), image.width(), image.height(), 1.0, grad.pixels().data());
  return grad;
}

Tensor mse_loss_gradient(const Tensor& target, const Tensor& prediction) {
  require_same(target, prediction, "mse_loss_gradient");
  Tensor g = prediction;
  const double k = 2.0 / static_cast<double>(target.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = static_cast<float>(k * (static_cast<double>(prediction[i]) - target[i]));
  }
  return g;
}

Tensor cycle_loss_gradient(const Tensor& original, const Tensor& reconstructed) {
  require_same(original, reconstructed, "cycle_loss_gradient");
  Tensor g = reconstructed;
  const float k = static_cast<float>(1.0 / static_cast<double>(original.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float d = reconstructed[i] - original[i];
    g[i] = d > 0.0f ? k : (d < 0.0f ? -k : 0.0f);
  }
  return g;
}

}  // namespace psd
