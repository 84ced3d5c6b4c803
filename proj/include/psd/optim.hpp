#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "psd/networks.hpp"

namespace psd {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {});

  // One update of every trainable parameter that holds a gradient.
  void step(ModelHandle& model);

  // Lower-level form: call begin_step() once, then update() per parameter slot.
  void begin_step();
  void update(std::size_t slot, std::span<float> value, std::span<const float> grad);

  double lr() const noexcept { return options_.lr; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  std::int64_t steps() const noexcept { return t_; }

 private:
  AdamOptions options_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

struct RmsPropOptions {
  double lr = 5e-5;
  double alpha = 0.99;
  double eps = 1e-8;
};

class RmsProp {
 public:
  explicit RmsProp(RmsPropOptions options = {});
  void step(ModelHandle& model);
  double lr() const noexcept { return options_.lr; }
  void set_lr(double lr) noexcept { options_.lr = lr; }

 private:
  RmsPropOptions options_;
  std::vector<std::vector<float>> sq_;
};

// base_lr * 0.5^floor((epoch - 1) / every), epochs counted from 1.
double halving_schedule(double base_lr, int epoch, int every);

// Clamp every trainable parameter into [-bound, bound].
void clip_parameters(ModelHandle& model, float bound);

}  // namespace psd
