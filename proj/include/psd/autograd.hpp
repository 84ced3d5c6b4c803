#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "psd/tensor.hpp"

namespace psd::ag {

struct Node;
using Var = std::shared_ptr<Node>;

/// Reverse-mode tape node. `grad` is empty until something flows into it.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;

  // Adds g into grad, allocating on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

// Leaf constructors.
Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad = true);

/// While alive, newly created ops record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Seeds d(root)/d(root) = 1 and runs the tape in reverse topological order.
// root must hold a single element.
void backward(const Var& root);

// --- layers ----------------------------------------------------------------

// weight (Cout, Cin, K, K), bias (Cout) or null. Zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);
// 2x2 kernel, stride 2. weight (Cin, Cout, 2, 2), bias (Cout).
Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias);
Var max_pool2x2(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, float slope);
Var concat_channels(std::span<const Var> parts);
// Per-channel batch normalisation with batch statistics; updates the running
// buffers (unbiased variance, PyTorch momentum convention).
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                     Tensor& running_var, float momentum = 0.1f, float eps = 1e-5f);
// Inference form using the running buffers.
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                    const Tensor& running_var, float eps = 1e-5f);
Var global_avg_pool(const Var& x);
// x (N, C, 1, 1), weight (Out, C, 1, 1), bias (Out) -> (N, Out, 1, 1).
Var linear(const Var& x, const Var& weight, const Var& bias);

// --- elementwise / reductions -----------------------------------------------

Var add(const Var& a, const Var& b);
Var mul_const(const Var& a, const Tensor& k);
Var scale(const Var& a, float k);
Var mean(const Var& x);
// Mean absolute difference against a constant target.
Var l1_loss(const Var& prediction, const Tensor& target);
Var mse_loss(const Var& prediction, const Tensor& target);
// Batch mean of per-image isotropic total variation sums.
Var tv_loss(const Var& x);

}  // namespace psd::ag
