#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "psd/image.hpp"
#include "psd/losses.hpp"
#include "psd/networks.hpp"
#include "psd/optim.hpp"
#include "psd/speckle.hpp"
#include "psd/train_log.hpp"

namespace psd {

struct AdversarialConfig {
  int critic_iterations = 5;
  float clip_value = 0.02f;
  double alpha = 0.1;
  int epochs = 16;
  int batch_size = 16;
  AdamOptions gen_optimizer{1e-4, 0.9, 0.999, 1e-8};
  RmsPropOptions critic_optimizer{5e-5, 0.99, 1e-8};
  int lr_halving_epochs = 8;
  double pair_looks = 1.0;

  void validate() const;
};

struct AdversarialModels {
  ModelHandle g1;
  ModelHandle g2;
  ModelHandle critic;
};

/// Owns the three networks and their optimisers for the alternating
/// WGAN / cycle / TV optimisation.
class AdversarialTrainer {
 public:
  AdversarialTrainer(AdversarialModels models, AdversarialConfig config, std::uint64_t seed);

  // One RMSProp ascent step on mean f(Y) - mean f(g1(Y) o N) followed by
  // clipping. g1 runs without a graph. Returns the pre-update critic value.
  double critic_step(const Tensor& batch, std::uint64_t speckle_seed);

  // One Adam descent step on -mean f(g1(Y) o N) + L1(Y, g2(g1(Y))) + alpha * TV(g1(Y))
  // over (theta1, theta2). The critic is only read.
  LossValue generator_step(const Tensor& batch, std::uint64_t speckle_seed);

  // Runs epochs [first_epoch, last_epoch] (1-based, last_epoch <= config.epochs).
  // Each epoch: shuffle, and for each mini-batch run critic_iterations critic
  // steps on randomly drawn batches, then one generator step on the batch.
  void train(std::span<const Image> dataset, int first_epoch, int last_epoch);
  void train(std::span<const Image> dataset) { train(dataset, 1, config_.epochs); }

  const AdversarialModels& models() const noexcept { return models_; }
  AdversarialModels& models() noexcept { return models_; }
  const TrainLog& log() const noexcept { return log_; }
  const AdversarialConfig& config() const noexcept { return config_; }
  AdversarialConfig& config() noexcept { return config_; }

  // Continue step numbering after a resume.
  void set_next_step(std::int64_t step) noexcept { next_step_ = step; }
  std::int64_t next_step() const noexcept { return next_step_; }
  // Number of g1 pixels clamped at zero by the pair generator view of g1 so far.
  double clamp_rate() const noexcept;

 private:
  void set_epoch_rates(int epoch);
  double elapsed() const;

  AdversarialModels models_;
  AdversarialConfig config_;
  std::uint64_t seed_;
  Adam gen_opt_;
  RmsProp critic_opt_;
  TrainLog log_;
  std::int64_t next_step_ = 0;
  int epoch_ = 0;
  std::uint64_t clamped_ = 0;
  std::uint64_t produced_ = 0;
  double start_time_;
};

AdversarialModels build_adversarial_models(const NestedUNetConfig& g1, const DnCNNConfig& g2,
                                           const DiscriminatorConfig& critic, std::uint64_t seed);

struct PairGenerationStats {
  std::uint64_t clamped_pixels = 0;
  std::uint64_t total_pixels = 0;
};

// Builds S2S pairs: base = max(g(Y), 0); L drawn uniformly from looks_choices;
// first/second speckled with independent seeds. g must have role g1 or
// despeckler (the latter gives the PSDi pairs). Inputs whose dims do not fit
// the network are reflect-padded and cropped back.
std::vector<S2SPair> generate_s2s_dataset(const ModelHandle& g, std::span<const Image> dataset,
                                          std::span<const double> looks_choices, std::uint64_t seed,
                                          PairGenerationStats* stats = nullptr);

// Draws one of `choices` uniformly. Shared by pair generation and online N2N regeneration.
double draw_looks(std::span<const double> choices, std::uint64_t seed);

}  // namespace psd
