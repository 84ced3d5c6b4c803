#include "psd/adversarial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "psd/error.hpp"
#include "psd/n2n.hpp"
#include "psd/random.hpp"

namespace psd {

namespace {

constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
constexpr std::uint64_t kCriticDrawTag = 0x4352495449ULL;
constexpr std::uint64_t kCriticNoiseTag = 0x434e4f495345ULL;
constexpr std::uint64_t kGenNoiseTag = 0x474e4f495345ULL;
constexpr std::uint64_t kLooksTag = 0x4c4f4f4b53ULL;
constexpr std::uint64_t kPairSeedTag = 0x5041495253ULL;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Unit-mean gamma noise with the shape of `like`.
Tensor noise_like(const Tensor& like, double looks, std::uint64_t seed) {
  const SpeckleField field =
      sample_speckle_field(like.w(), like.h() * like.c() * like.n(), LookCount(looks), seed);
  Tensor out(like.n(), like.c(), like.h(), like.w());
  std::copy(field.values.begin(), field.values.end(), out.data());
  return out;
}

// Disables gradient recording into a model's parameters for a scope.
class FreezeParameters {
 public:
  explicit FreezeParameters(ModelHandle& model) : model_(model) {
    for (auto& p : model_.parameters()) p.var->requires_grad = false;
  }
  ~FreezeParameters() {
    for (auto& p : model_.parameters()) p.var->requires_grad = p.trainable;
  }
  FreezeParameters(const FreezeParameters&) = delete;
  FreezeParameters& operator=(const FreezeParameters&) = delete;

 private:
  ModelHandle& model_;
};

Tensor gather(std::span<const Image> dataset, std::span<const std::size_t> indices) {
  std::vector<Image> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(dataset[i]);
  return stack(picked);
}

}  // namespace

void AdversarialConfig::validate() const {
  if (critic_iterations < 1) throw InvalidArgument("critic_iterations must be >= 1");
  if (!(clip_value > 0.0f)) throw InvalidArgument("clip value must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be a finite value >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (lr_halving_epochs < 1) throw InvalidArgument("lr_halving_epochs must be >= 1");
  if (!(pair_looks > 0.0)) throw InvalidArgument("pair_looks must be positive");
  if (!(gen_optimizer.lr >= 0.0) || !(critic_optimizer.lr >= 0.0)) throw InvalidArgument("learning rates must be >= 0");
}

AdversarialModels build_adversarial_models(const NestedUNetConfig& g1, const DnCNNConfig& g2,
                                           const DiscriminatorConfig& critic, std::uint64_t seed) {
  return {ModelHandle(Role::kG1, g1, derive_seed(seed, 1)), ModelHandle(Role::kG2, g2, derive_seed(seed, 2)),
          ModelHandle(Role::kDiscriminator, critic, derive_seed(seed, 3))};
}

AdversarialTrainer::AdversarialTrainer(AdversarialModels models, AdversarialConfig config, std::uint64_t seed)
    : models_(std::move(models)),
      config_(config),
      seed_(seed),
      gen_opt_((config.validate(), config.gen_optimizer)),
      critic_opt_(config.critic_optimizer),
      start_time_(now_seconds()) {
  if (models_.g1.role() != Role::kG1) throw InvalidArgument("first generator must have role g1");
  if (models_.g2.role() != Role::kG2) throw InvalidArgument("second generator must have role g2");
  if (models_.critic.role() != Role::kDiscriminator) throw InvalidArgument("critic must have role discriminator");
}

double AdversarialTrainer::elapsed() const { return now_seconds() - start_time_; }

double AdversarialTrainer::clamp_rate() const noexcept {
  return produced_ == 0 ? 0.0 : static_cast<double>(clamped_) / static_cast<double>(produced_);
}

void AdversarialTrainer::set_epoch_rates(int epoch) {
  epoch_ = epoch;
  gen_opt_.set_lr(halving_schedule(config_.gen_optimizer.lr, epoch, config_.lr_halving_epochs));
  critic_opt_.set_lr(halving_schedule(config_.critic_optimizer.lr, epoch, config_.lr_halving_epochs));
}

double AdversarialTrainer::critic_step(const Tensor& batch, std::uint64_t speckle_seed) {
  models_.g1.check_input(batch);
  Tensor fake = models_.g1.infer(batch);
  const Tensor noise = noise_like(fake, config_.pair_looks, speckle_seed);
  for (std::size_t i = 0; i < fake.size(); ++i) fake[i] *= noise[i];

  ModelHandle& f = models_.critic;
  f.zero_grad();
  ag::Var real_score = f.forward(ag::constant(batch), true);
  ag::Var fake_score = f.forward(ag::constant(fake), true);
  const LossValue value = wgan_loss(real_score->value.span(), fake_score->value.span());
  // Ascent on mean f(real) - mean f(fake) is descent on its negation.
  ag::Var objective = ag::add(ag::mean(fake_score), ag::scale(ag::mean(real_score), -1.0f));
  ag::backward(objective);
  critic_opt_.step(f);
  clip_parameters(f, config_.clip_value);
  f.zero_grad();

  double max_abs = 0.0;
  for (const auto& p : f.parameters()) {
    if (!p.trainable) continue;
    for (float v : p.var->value.span()) max_abs = std::max(max_abs, static_cast<double>(std::abs(v)));
  }
  log_.append({next_step_++, "critic", epoch_,
               {{"critic_loss", value.value}, {"critic_lr", critic_opt_.lr()}, {"critic_max_abs", max_abs}},
               elapsed()});
  return value.value;
}

LossValue AdversarialTrainer::generator_step(const Tensor& batch, std::uint64_t speckle_seed) {
  models_.g1.check_input(batch);
  ModelHandle& g1 = models_.g1;
  ModelHandle& g2 = models_.g2;
  FreezeParameters frozen(models_.critic);
  g1.zero_grad();
  g2.zero_grad();

  ag::Var y = ag::constant(batch);
  ag::Var x = g1.forward(y, true);
  ag::Var reconstruction = g2.forward(x, true);
  const Tensor noise = noise_like(x->value, config_.pair_looks, speckle_seed);
  ag::Var fake_score = models_.critic.forward(ag::mul_const(x, noise), false);

  ag::Var wgan = ag::scale(ag::mean(fake_score), -1.0f);
  ag::Var cycle = ag::l1_loss(reconstruction, batch);
  ag::Var tv = ag::tv_loss(x);
  ag::Var objective = ag::add(ag::add(wgan, cycle), ag::scale(tv, static_cast<float>(config_.alpha)));

  LossValue out = generator_objective({wgan->value[0], {}, {}}, cycle_loss(batch, reconstruction->value),
                                      {tv->value[0], {}, {}}, config_.alpha);

  std::uint64_t clamped = 0;
  for (float v : x->value.span()) clamped += v < 0.0f ? 1 : 0;
  clamped_ += clamped;
  produced_ += x->value.size();

  ag::backward(objective);
  gen_opt_.begin_step();
  std::size_t slot = 0;
  for (ModelHandle* m : {&g1, &g2}) {
    for (auto& p : m->parameters()) {
      if (p.trainable && p.var->grad.size() != 0) gen_opt_.update(slot, p.var->value.span(), p.var->grad.span());
      ++slot;
    }
  }
  g1.zero_grad();
  g2.zero_grad();

  const double pixels = static_cast<double>(batch.h()) * batch.w();
  log_.append({next_step_++,
               "generator",
               epoch_,
               {{"wgan", out.components["wgan"]},
                {"cycle", out.components["cycle"]},
                {"tv", out.components["tv"]},
                {"tv_per_pixel", out.components["tv"] / pixels},
                {"objective", out.value},
                {"gen_lr", gen_opt_.lr()},
                {"clamp_rate", static_cast<double>(clamped) / static_cast<double>(x->value.size())}},
               elapsed()});
  return out;
}

void AdversarialTrainer::train(std::span<const Image> dataset, int first_epoch, int last_epoch) {
  if (dataset.empty()) throw InvalidArgument("adversarial training needs a non-empty dataset");
  if (first_epoch < 1 || last_epoch > config_.epochs || first_epoch > last_epoch) {
    throw InvalidArgument("epoch range [" + std::to_string(first_epoch) + ", " + std::to_string(last_epoch) +
                          "] is outside 1.." + std::to_string(config_.epochs));
  }
  const std::size_t batch = std::min<std::size_t>(config_.batch_size, dataset.size());
  const std::size_t batches = dataset.size() / batch;

  for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    set_epoch_rates(epoch);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Philox shuffle(derive_seed(seed_, kShuffleTag, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    Philox draws(derive_seed(seed_, kCriticDrawTag, epoch));

    for (std::size_t b = 0; b < batches; ++b) {
      for (int k = 0; k < config_.critic_iterations; ++k) {
        std::vector<std::size_t> pick(batch);
        for (auto& i : pick) i = draws.below(dataset.size());
        critic_step(gather(dataset, pick), derive_seed(seed_, kCriticNoiseTag, next_step_));
      }
      const std::span<const std::size_t> slice(order.data() + b * batch, batch);
      generator_step(gather(dataset, slice), derive_seed(seed_, kGenNoiseTag, next_step_));
    }
  }
  for (ModelHandle* m : {&models_.g1, &models_.g2, &models_.critic}) {
    m->metadata()["step"] = std::to_string(next_step_);
    m->metadata()["epoch"] = std::to_string(last_epoch);
  }
}

double draw_looks(std::span<const double> choices, std::uint64_t seed) {
  if (choices.empty()) throw InvalidArgument("looks choices must not be empty");
  Philox rng(seed);
  return choices[rng.below(choices.size())];
}

std::vector<S2SPair> generate_s2s_dataset(const ModelHandle& g, std::span<const Image> dataset,
                                          std::span<const double> looks_choices, std::uint64_t seed,
                                          PairGenerationStats* stats) {
  if (g.role() != Role::kG1 && g.role() != Role::kDespeckler) {
    throw InvalidArgument("pair bases come from a g1 or despeckler model, got '" + std::string(role_name(g.role())) +
                          "'");
  }
  if (looks_choices.empty()) throw InvalidArgument("looks choices must not be empty");
  for (double l : looks_choices) (void)LookCount{l};

  std::vector<S2SPair> pairs;
  pairs.reserve(dataset.size());
  PairGenerationStats local;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Image base = run_image_model(g, dataset[i]);
    for (float& v : base.pixels()) {
      if (v < 0.0f) {
        v = 0.0f;
        ++local.clamped_pixels;
      }
    }
    local.total_pixels += base.size();
    const double looks = draw_looks(looks_choices, derive_seed(seed, kLooksTag, i));
    const std::uint64_t s1 = derive_seed(seed, kPairSeedTag, 2 * i);
    std::uint64_t s2 = derive_seed(seed, kPairSeedTag, 2 * i + 1);
    if (s2 == s1) s2 = derive_seed(s2, kPairSeedTag);
    pairs.push_back(make_s2s_pair(base, LookCount(looks), s1, s2));
  }
  if (stats) {
    stats->clamped_pixels += local.clamped_pixels;
    stats->total_pixels += local.total_pixels;
  }
  return pairs;
}

}  // namespace psd
