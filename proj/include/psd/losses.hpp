#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "psd/image.hpp"
#include "psd/tensor.hpp"

namespace psd {

struct LossValue {
  double value = 0.0;
  // Named breakdown (wgan, cycle, tv, mse) for composite losses. For a
  // composite, `weights` holds the factor each component entered with.
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
};

// mean(real) - mean(fake). The critic ascends this, g1 descends it.
LossValue wgan_loss(std::span<const float> critic_on_real, std::span<const float> critic_on_fake);

// Mean absolute difference over pixels and batch.
LossValue cycle_loss(const Tensor& original, const Tensor& reconstructed);

// Isotropic total variation, summed over w in [0, W-2], h in [0, H-2]:
//   sum sqrt((p(w+1,h) - p(w,h))^2 + (p(w,h+1) - p(w,h))^2 + eps)
// The last row and column only enter as the "+1" neighbour.
LossValue tv_loss(const Image& image);

// Mean squared difference over pixels and batch.
LossValue mse_loss(const Tensor& target, const Tensor& prediction);

// wgan + cycle + alpha * tv, with the breakdown retained.
LossValue generator_objective(const LossValue& wgan, const LossValue& cycle, const LossValue& tv,
                              double alpha);

inline constexpr double kTvEpsilon = 1e-8;

namespace kernels {

// Raw value/gradient kernels shared by the standalone losses above and by the
// autograd ops. Accumulation is in double.
double tv_value(const float* plane, int width, int height);
// Adds scale * d(tv)/d(p) into grad.
void tv_gradient(const float* plane, int width, int height, double scale, float* grad);

double abs_diff_sum(std::span<const float> a, std::span<const float> b);
double sq_diff_sum(std::span<const float> a, std::span<const float> b);

}  // namespace kernels

// d(tv_loss)/d(pixel), same shape as the image.
Image tv_loss_gradient(const Image& image);
// d(mse_loss)/d(prediction).
Tensor mse_loss_gradient(const Tensor& target, const Tensor& prediction);
// d(cycle_loss)/d(reconstructed); sign(0) taken as 0.
Tensor cycle_loss_gradient(const Tensor& original, const Tensor& reconstructed);

}  // namespace psd
