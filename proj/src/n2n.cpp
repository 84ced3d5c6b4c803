#include "psd/n2n.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "psd/error.hpp"
#include "psd/random.hpp"

namespace psd {

namespace {

constexpr std::uint64_t kInitTag = 0x4e32494e4954ULL;
constexpr std::uint64_t kShuffleTag = 0x4e3253485546ULL;
constexpr std::uint64_t kLooksTag = 0x4e324c4f4f4bULL;
constexpr std::uint64_t kFieldTag = 0x4e32464c4400ULL;
constexpr std::uint64_t kPsdiPairsTag = 0x5053444950ULL;
constexpr std::uint64_t kPsdiTrainTag = 0x5053444954ULL;

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

int multiple_for(const ModelHandle& model) {
  if (const auto* c = std::get_if<NestedUNetConfig>(&model.config())) return 1 << c->depth;
  return 1;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void N2NConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("n2n epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("n2n batch_size must be >= 1");
  if (lr_halving_epochs < 1) throw InvalidArgument("n2n lr_halving_epochs must be >= 1");
  if (!(optimizer.lr > 0.0)) throw InvalidArgument("n2n learning rate must be positive");
  if (looks_choices.empty()) throw InvalidArgument("looks choices must not be empty");
  for (double l : looks_choices) (void)LookCount{l};
  // Surfaces architecture errors before any training happens.
  (void)ModelHandle(Role::kDespeckler, architecture, 0);
}

Image run_image_model(const ModelHandle& model, const Image& image) {
  if (model.role() == Role::kDiscriminator) throw InvalidArgument("the critic does not produce images");
  const int m = multiple_for(model);
  const int w = image.width(), h = image.height();
  const int pw = (w + m - 1) / m * m, ph = (h + m - 1) / m * m;
  if (pw == w && ph == h) return to_image(model.infer(stack(image)), 0);

  Image padded(pw, ph);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) padded.at(x, y) = image.at(reflect(x, w), reflect(y, h));
  return crop(to_image(model.infer(stack(padded)), 0), 0, 0, w, h);
}

Image despeckle(const ModelHandle& despeckler, const Image& image) { return clamp(run_image_model(despeckler, image), 0.0f, 1.0f); }

std::vector<Image> despeckle(const ModelHandle& despeckler, std::span<const Image> images) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const Image& image : images) out.push_back(despeckle(despeckler, image));
  return out;
}

N2NResult train_despeckler(std::span<const S2SPair> pairs, const N2NConfig& config, std::uint64_t seed,
                           const ModelHandle* init) {
  config.validate();
  if (pairs.empty()) throw InvalidArgument("n2n training needs at least one pair");
  for (const S2SPair& p : pairs) {
    if (!p.first.same_shape(pairs[0].first) || !p.second.same_shape(pairs[0].first) ||
        !p.base.same_shape(pairs[0].first)) {
      throw ShapeError("all training pairs must share one shape");
    }
  }

  ModelHandle model = init ? *init : ModelHandle(Role::kDespeckler, config.architecture, derive_seed(seed, kInitTag));
  if (init && (init->role() != Role::kDespeckler || !(init->config() == ModelConfig(config.architecture)))) {
    throw ConfigMismatch("initial weights do not match the configured despeckler architecture");
  }
  model.check_input(stack(pairs[0].first));

  const double start = now_seconds();
  TrainLog log;
  std::int64_t step = 0;
  if (init) {
    auto it = init->metadata().find("step");
    if (it != init->metadata().end()) step = std::stoll(it->second);
  }
  Adam adam(config.optimizer);
  const std::size_t batch = std::min<std::size_t>(config.batch_size, pairs.size());
  const std::size_t batches = pairs.size() / batch;
  const std::size_t n = pairs.size();

  std::vector<Image> inputs(n), targets(n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.set_lr(halving_schedule(config.optimizer.lr, epoch, config.lr_halving_epochs));
    for (std::size_t i = 0; i < n; ++i) {
      if (config.pair_mode == PairMode::kFixed) {
        inputs[i] = pairs[i].first;
        targets[i] = pairs[i].second;
      } else {
        const std::uint64_t index = static_cast<std::uint64_t>(epoch) * n + i;
        const LookCount looks(draw_looks(config.looks_choices, derive_seed(seed, kLooksTag, index)));
        inputs[i] = speckle(pairs[i].base, looks, derive_seed(seed, kFieldTag, 2 * index));
        targets[i] = speckle(pairs[i].base, looks, derive_seed(seed, kFieldTag, 2 * index + 1));
      }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Philox shuffle(derive_seed(seed, kShuffleTag, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<Image> xs, ys;
      xs.reserve(batch);
      ys.reserve(batch);
      for (std::size_t k = 0; k < batch; ++k) {
        xs.push_back(inputs[order[b * batch + k]]);
        ys.push_back(targets[order[b * batch + k]]);
      }
      const Tensor target = stack(ys);
      model.zero_grad();
      ag::Var prediction = model.forward(ag::constant(stack(xs)), true);
      ag::Var loss = ag::mse_loss(prediction, target);
      ag::backward(loss);
      adam.step(model);
      model.zero_grad();
      const double mse = loss->value[0];
      epoch_sum += mse;
      log.append({step++, "n2n", epoch, {{"mse", mse}, {"lr", adam.lr()}}, now_seconds() - start});
    }
    log.append({step++, "n2n_epoch", epoch, {{"epoch_mse", epoch_sum / static_cast<double>(batches)}},
                now_seconds() - start});
  }
  model.metadata()["step"] = std::to_string(step);
  model.metadata()["epoch"] = std::to_string(config.epochs);
  return {std::move(model), std::move(log), std::vector<S2SPair>(pairs.begin(), pairs.end())};
}

N2NResult psdi_round(const ModelHandle& despeckler, std::span<const Image> dataset, const N2NConfig& config,
                     std::uint64_t seed) {
  if (despeckler.role() != Role::kDespeckler) throw InvalidArgument("a PSDi round starts from a despeckler model");
  auto pairs = generate_s2s_dataset(despeckler, dataset, config.looks_choices, derive_seed(seed, kPsdiPairsTag));
  return train_despeckler(pairs, config, derive_seed(seed, kPsdiTrainTag), config.fine_tune ? &despeckler : nullptr);
}

}  // namespace psd
