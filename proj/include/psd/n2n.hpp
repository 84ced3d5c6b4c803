#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psd/adversarial.hpp"
#include "psd/image.hpp"
#include "psd/networks.hpp"
#include "psd/optim.hpp"
#include "psd/speckle.hpp"
#include "psd/train_log.hpp"

namespace psd {

enum class PairMode { kOnline, kFixed };

struct N2NConfig {
  int epochs = 16;
  int batch_size = 16;
  AdamOptions optimizer{1e-4, 0.9, 0.999, 1e-8};
  int lr_halving_epochs = 8;
  std::vector<double> looks_choices{1, 2, 4, 8, 16};
  // Online: every epoch redraws L and both speckle fields from each pair's base.
  PairMode pair_mode = PairMode::kOnline;
  // PSDi: start round-2 training from the round-1 weights instead of a fresh init.
  bool fine_tune = false;
  NestedUNetConfig architecture{2, 16, 3, "transposed", false};

  void validate() const;
};

struct N2NResult {
  ModelHandle despeckler;
  TrainLog log;
  std::vector<S2SPair> pairs;  // the pair set the model was trained from
};

// Minimises mse(second, g(first)) over mini-batches.
N2NResult train_despeckler(std::span<const S2SPair> pairs, const N2NConfig& config, std::uint64_t seed,
                           const ModelHandle* init = nullptr);

// Reflect-pads to a multiple of 2^depth, runs the network, crops back and
// clamps to [0, 1].
Image despeckle(const ModelHandle& despeckler, const Image& image);
std::vector<Image> despeckle(const ModelHandle& despeckler, std::span<const Image> images);

// Runs the network on an arbitrarily sized image (reflect pad / crop), without clamping.
Image run_image_model(const ModelHandle& model, const Image& image);

// One PSDi round: regenerate pairs with the despeckler as base producer, then
// train a new despeckler on them.
N2NResult psdi_round(const ModelHandle& despeckler, std::span<const Image> dataset,
                     const N2NConfig& config, std::uint64_t seed);

}  // namespace psd
