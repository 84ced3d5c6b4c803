#include "psd/optim.hpp"

#include <algorithm>
#include <cmath>

#include "psd/error.hpp"

namespace psd {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.lr >= 0.0)) throw InvalidArgument("adam learning rate must be >= 0");
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
    throw InvalidArgument("adam betas must lie in [0, 1)");
  }
  if (!(options_.eps > 0.0)) throw InvalidArgument("adam eps must be positive");
}

void Adam::begin_step() { ++t_; }

void Adam::update(std::size_t slot, std::span<float> value, std::span<const float> grad) {
  if (value.size() != grad.size()) throw ShapeError("gradient size does not match parameter size");
  if (slot >= m_.size()) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  auto& m = m_[slot];
  auto& v = v_[slot];
  if (m.size() != value.size()) {
    m.assign(value.size(), 0.0f);
    v.assign(value.size(), 0.0f);
  }
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = options_.lr / c1;
  const double root_c2 = std::sqrt(c2);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g);
    v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g * g);
    const double denom = std::sqrt(static_cast<double>(v[i])) / root_c2 + options_.eps;
    value[i] = static_cast<float>(value[i] - step * m[i] / denom);
  }
}

void Adam::step(ModelHandle& model) {
  begin_step();
  auto& params = model.parameters();
  for (std::size_t slot = 0; slot < params.size(); ++slot) {
    auto& p = params[slot];
    if (!p.trainable || p.var->grad.size() == 0) continue;
    update(slot, p.var->value.span(), p.var->grad.span());
  }
}

RmsProp::RmsProp(RmsPropOptions options) : options_(options) {
  if (!(options_.lr >= 0.0)) throw InvalidArgument("rmsprop learning rate must be >= 0");
  if (!(options_.alpha >= 0.0 && options_.alpha < 1.0)) throw InvalidArgument("rmsprop alpha must lie in [0, 1)");
  if (!(options_.eps > 0.0)) throw InvalidArgument("rmsprop eps must be positive");
}

void RmsProp::step(ModelHandle& model) {
  auto& params = model.parameters();
  if (sq_.size() < params.size()) sq_.resize(params.size());
  const double a = options_.alpha;
  for (std::size_t slot = 0; slot < params.size(); ++slot) {
    auto& p = params[slot];
    if (!p.trainable || p.var->grad.size() == 0) continue;
    auto value = p.var->value.span();
    auto grad = p.var->grad.span();
    auto& sq = sq_[slot];
    if (sq.size() != value.size()) sq.assign(value.size(), 0.0f);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      sq[i] = static_cast<float>(a * sq[i] + (1.0 - a) * g * g);
      value[i] = static_cast<float>(value[i] - options_.lr * g / (std::sqrt(static_cast<double>(sq[i])) + options_.eps));
    }
  }
}

double halving_schedule(double base_lr, int epoch, int every) {
  if (epoch < 1) throw InvalidArgument("epochs are counted from 1");
  if (every < 1) throw InvalidArgument("halving interval must be >= 1");
  return base_lr * std::ldexp(1.0, -((epoch - 1) / every));
}

void clip_parameters(ModelHandle& model, float bound) {
  if (!(bound > 0.0f)) throw InvalidArgument("clip bound must be positive");
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    for (float& v : p.var->value.span()) v = std::clamp(v, -bound, bound);
  }
}

}  // namespace psd
