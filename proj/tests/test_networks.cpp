#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "psd/error.hpp"
#include "psd/networks.hpp"
#include "psd/random.hpp"

using namespace psd;
namespace fs = std::filesystem;

namespace {

std::size_t conv_count(std::size_t in, std::size_t out, std::size_t k, bool bias = true) {
  return out * in * k * k + (bias ? out : 0);
}

// Counted from the layer table: each node holds two convolutions, each
// up-sampling edge one 2x2 transposed convolution, plus a 1x1 head.
std::size_t unet_count(int depth, int base, int kernel, bool bn) {
  auto ch = [&](int i) { return static_cast<std::size_t>(base) << i; };
  auto node = [&](std::size_t in, std::size_t out) {
    return conv_count(in, out, kernel) + conv_count(out, out, kernel) + (bn ? 4 * out : 0);
  };
  std::size_t total = node(1, ch(0));
  for (int i = 1; i <= depth; ++i) total += node(ch(i - 1), ch(i));
  for (int j = 1; j <= depth; ++j)
    for (int i = 0; i + j <= depth; ++i) total += conv_count(ch(i + 1), ch(i), 2) + node((j + 1) * ch(i), ch(i));
  return total + conv_count(ch(0), 1, 1);
}

std::size_t dncnn_count(int depth, int ch, bool bn) {
  std::size_t total = conv_count(1, ch, 3) + conv_count(ch, 1, 3);
  for (int l = 1; l + 1 < depth; ++l) total += conv_count(ch, ch, 3, !bn) + (bn ? 2 * ch : 0);
  return total;
}

std::size_t critic_count(int stages, int base) {
  std::size_t total = 0, in = 1;
  for (int s = 0; s < stages; ++s) {
    const std::size_t out = static_cast<std::size_t>(base) << s;
    total += conv_count(in, out, 3);
    in = out;
  }
  return total + in + 1;
}

Tensor random_batch(int n, int h, int w, std::uint64_t seed) {
  Philox rng(seed);
  Tensor t(n, 1, h, w);
  for (float& v : t.span()) v = static_cast<float>(rng.uniform());
  return t;
}

// Zero-padded strided 3x3 convolution on one sample, written as plain loops.
std::vector<std::vector<std::vector<double>>> naive_conv(const std::vector<std::vector<std::vector<double>>>& x,
                                                         const Tensor& w, const Tensor& b, int stride) {
  const int cin = static_cast<int>(x.size()), h = static_cast<int>(x[0].size()), wd = static_cast<int>(x[0][0].size());
  const int oh = (h + 2 - 3) / stride + 1, ow = (wd + 2 - 3) / stride + 1;
  std::vector<std::vector<std::vector<double>>> y(w.n(), std::vector<std::vector<double>>(oh, std::vector<double>(ow)));
  for (int o = 0; o < w.n(); ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = b[o];
        for (int i = 0; i < cin; ++i)
          for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
              const int yy = r * stride + dy - 1, xx = c * stride + dx - 1;
              if (yy < 0 || xx < 0 || yy >= h || xx >= wd) continue;
              s += w[((static_cast<std::size_t>(o) * cin + i) * 3 + dy) * 3 + dx] * x[i][yy][xx];
            }
        y[o][r][c] = s;
      }
  return y;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "psd_test_networks";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(NetworkParameters, OneLevelNestedUNetHandCount) {
  const auto model = build_model(Role::kDespeckler, NestedUNetConfig{1, 4, 3, "transposed", false});
  EXPECT_EQ(model.parameter_count(), 1645u);
  EXPECT_EQ(unet_count(1, 4, 3, false), 1645u);
}

TEST(NetworkParameters, ClosedFormCounts) {
  for (int depth : {1, 2, 3, 4}) {
    for (int base : {4, 16, 32}) {
      EXPECT_EQ(build_model(Role::kG1, NestedUNetConfig{depth, base, 3, "transposed", false}).parameter_count(),
                unet_count(depth, base, 3, false));
    }
  }
  EXPECT_EQ(build_model(Role::kDespeckler, NestedUNetConfig{2, 8, 3, "transposed", true}).parameter_count(),
            unet_count(2, 8, 3, true));
  for (int depth : {3, 8, 17}) {
    EXPECT_EQ(build_model(Role::kG2, DnCNNConfig{depth, 64, true, true}).parameter_count(), dncnn_count(depth, 64, true));
    EXPECT_EQ(build_model(Role::kG2, DnCNNConfig{depth, 16, true, false}).parameter_count(),
              dncnn_count(depth, 16, false));
  }
  EXPECT_EQ(build_model(Role::kDiscriminator, DiscriminatorConfig{4, 64, 0.2f}).parameter_count(), critic_count(4, 64));
  EXPECT_EQ(critic_count(4, 64), 1550337u);
}

TEST(NetworkParameters, BatchNormRunningStatsAreNotTrainable) {
  const auto model = build_model(Role::kG2, DnCNNConfig{4, 8, true, true});
  EXPECT_FALSE(model.parameter("bn1.running_mean").trainable);
  EXPECT_FALSE(model.parameter("bn2.running_var").trainable);
  EXPECT_TRUE(model.parameter("bn1.gamma").trainable);
}

TEST(NetworkBuild, RejectsMismatchedRoleAndConfig) {
  EXPECT_THROW(build_model(Role::kDespeckler, DnCNNConfig{}), InvalidArgument);
  EXPECT_THROW(build_model(Role::kG2, NestedUNetConfig{}), InvalidArgument);
  EXPECT_THROW(build_model(Role::kDiscriminator, NestedUNetConfig{}), InvalidArgument);
  EXPECT_THROW(build_model(Role::kG2, DnCNNConfig{2, 8, true, true}), InvalidArgument);
  EXPECT_THROW(build_model(Role::kG1, NestedUNetConfig{0, 4, 3, "transposed", false}), InvalidArgument);
  EXPECT_THROW(build_model(Role::kG1, NestedUNetConfig{2, 4, 3, "bilinear", false}), InvalidArgument);
}

TEST(NetworkBuild, SameSeedSameParameters) {
  const NestedUNetConfig cfg{2, 8, 3, "transposed", false};
  const auto a = build_model(Role::kDespeckler, cfg, 5);
  const auto b = build_model(Role::kDespeckler, cfg, 5);
  const auto c = build_model(Role::kDespeckler, cfg, 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].var->value, b.parameters()[i].var->value);
    differs = differs || !(a.parameters()[i].var->value == c.parameters()[i].var->value);
  }
  EXPECT_TRUE(differs);
}

TEST(NetworkBuild, KaimingScaleAndZeroBias) {
  const auto model = build_model(Role::kG2, DnCNNConfig{3, 64, true, false}, 1);
  const Tensor& w = model.parameter("conv1.weight").var->value;
  double q = 0.0;
  for (float v : w.span()) q += static_cast<double>(v) * v;
  EXPECT_NEAR(q / static_cast<double>(w.size()), 2.0 / (64 * 9), 0.1 * 2.0 / (64 * 9));
  for (float v : model.parameter("conv1.bias").var->value.span()) EXPECT_EQ(v, 0.0f);
}

TEST(NetworkForward, DespecklerPreservesShape) {
  const auto model = build_model(Role::kDespeckler, NestedUNetConfig{2, 4, 3, "transposed", false}, 3);
  const Tensor out = forward(model, random_batch(16, 96, 96, 1));
  EXPECT_EQ(out.shape(), (std::array<int, 4>{16, 1, 96, 96}));
}

TEST(NetworkForward, ShapeInvarianceAcrossSizes) {
  const auto unet = build_model(Role::kG1, NestedUNetConfig{3, 4, 3, "transposed", false}, 3);
  const auto g2 = build_model(Role::kG2, DnCNNConfig{4, 8, true, true}, 3);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 40}, std::pair{64, 24}}) {
    EXPECT_EQ(forward(unet, random_batch(2, h, w, 2)).shape(), (std::array<int, 4>{2, 1, h, w}));
    EXPECT_EQ(forward(g2, random_batch(2, h + 1, w + 3, 2)).shape(), (std::array<int, 4>{2, 1, h + 1, w + 3}));
  }
}

TEST(NetworkForward, CriticGivesOneScalarPerImage) {
  const auto critic = build_model(Role::kDiscriminator, DiscriminatorConfig{4, 64, 0.2f}, 3);
  EXPECT_EQ(forward(critic, random_batch(3, 96, 96, 2)).shape(), (std::array<int, 4>{3, 1, 1, 1}));
}

TEST(NetworkForward, DeterministicOutputs) {
  const auto model = build_model(Role::kDespeckler, NestedUNetConfig{2, 4, 3, "transposed", false}, 3);
  const Tensor x = random_batch(2, 16, 16, 4);
  EXPECT_EQ(forward(model, x), forward(model, x));
}

TEST(NetworkForward, ResidualIdentityWithZeroWeights) {
  auto g2 = build_model(Role::kG2, DnCNNConfig{5, 8, true, true}, 3);
  for (Parameter& p : g2.parameters()) {
    if (p.name.ends_with(".weight") || p.name.ends_with(".bias")) p.var->value.fill(0.0f);
  }
  const Tensor x = random_batch(2, 12, 12, 5);
  EXPECT_EQ(forward(g2, x), x);
}

TEST(NetworkForward, CriticHandValueOneStage) {
  auto critic = build_model(Role::kDiscriminator, DiscriminatorConfig{1, 1, 0.2f});
  critic.parameter("conv0.weight").var->value.fill(0.5f);
  critic.parameter("head.weight").var->value.fill(3.0f);
  critic.parameter("head.bias").var->value.fill(1.0f);
  // A 2x2 image of ones: the single stride-2 output sees four ones -> 2,
  // leaky ReLU passes it, pooling keeps it, head gives 3 * 2 + 1.
  const Tensor out = forward(critic, Tensor(1, 1, 2, 2, 1.0f));
  EXPECT_FLOAT_EQ(out[0], 7.0f);
}

TEST(NetworkForward, CriticMatchesLoopOracleFourStages) {
  const DiscriminatorConfig cfg{4, 1, 0.2f};
  auto critic = build_model(Role::kDiscriminator, cfg, 9);
  Philox rng(77);
  for (Parameter& p : critic.parameters())
    for (float& v : p.var->value.span()) v = static_cast<float>(rng.uniform() - 0.5);
  for (const float fill : {0.7f, -0.4f}) {
    std::vector<std::vector<std::vector<double>>> x(1, std::vector<std::vector<double>>(8, std::vector<double>(8, fill)));
    for (int s = 0; s < 4; ++s) {
      const std::string name = "conv" + std::to_string(s);
      x = naive_conv(x, critic.parameter(name + ".weight").var->value, critic.parameter(name + ".bias").var->value, 2);
      for (auto& ch : x)
        for (auto& row : ch)
          for (double& v : row) v = v > 0 ? v : 0.2 * v;
    }
    const Tensor& head = critic.parameter("head.weight").var->value;
    ASSERT_EQ(head.size(), x.size());
    double expected = critic.parameter("head.bias").var->value[0];
    for (std::size_t ch = 0; ch < x.size(); ++ch) {
      double pooled = 0.0;
      for (const auto& row : x[ch])
        for (double v : row) pooled += v;
      expected += head[ch] * pooled / static_cast<double>(x[ch].size() * x[ch][0].size());
    }
    EXPECT_NEAR(forward(critic, Tensor(1, 1, 8, 8, fill))[0], expected, 1e-5);
  }
}

TEST(NetworkForward, ShapeErrorNamesAxis) {
  const auto model = build_model(Role::kDespeckler, NestedUNetConfig{2, 4, 3, "transposed", false});
  try {
    forward(model, Tensor(1, 1, 18, 16));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
  try {
    forward(model, Tensor(1, 1, 16, 18));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
  try {
    forward(model, Tensor(1, 3, 16, 16));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
  }
}

TEST(NetworkGraph, NoBatchNormWithoutFlag) {
  const auto plain = build_model(Role::kDespeckler, NestedUNetConfig{4, 4, 3, "transposed", false});
  for (const LayerInfo& layer : plain.layers()) EXPECT_NE(layer.kind, "batch_norm") << layer.name;
  const auto with_bn = build_model(Role::kDespeckler, NestedUNetConfig{4, 4, 3, "transposed", true});
  EXPECT_TRUE(std::any_of(with_bn.layers().begin(), with_bn.layers().end(),
                          [](const LayerInfo& l) { return l.kind == "batch_norm"; }));
}

TEST(NetworkGraph, EveryDespecklerParameterReceivesGradient) {
  auto model = build_model(Role::kDespeckler, NestedUNetConfig{3, 4, 3, "transposed", false}, 21);
  const Tensor x = random_batch(2, 16, 16, 1);
  const Tensor target = random_batch(2, 16, 16, 2);
  model.zero_grad();
  ag::backward(ag::mse_loss(model.forward(ag::constant(x), true), target));
  for (const Parameter& p : model.parameters()) {
    ASSERT_FALSE(p.var->grad.empty()) << p.name;
    double norm = 0.0;
    for (float g : p.var->grad.span()) norm += std::fabs(g);
    EXPECT_GT(norm, 0.0) << p.name;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto model = build_model(Role::kG2, DnCNNConfig{4, 8, true, true}, 13);
  model.parameter("bn1.running_mean").var->value.fill(0.125f);
  model.metadata()["step"] = "42";
  const fs::path path = temp_file("g2.ckpt");
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.role(), Role::kG2);
  EXPECT_EQ(loaded.config(), model.config());
  EXPECT_EQ(loaded.metadata().at("step"), "42");
  ASSERT_EQ(loaded.parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    EXPECT_EQ(loaded.parameters()[i].name, model.parameters()[i].name);
    EXPECT_EQ(loaded.parameters()[i].trainable, model.parameters()[i].trainable);
    EXPECT_EQ(0, std::memcmp(loaded.parameters()[i].var->value.data(), model.parameters()[i].var->value.data(),
                             model.parameters()[i].var->value.size() * sizeof(float)));
  }
}

TEST(Checkpoint, CopyIsDeep) {
  auto model = build_model(Role::kDiscriminator, DiscriminatorConfig{2, 4, 0.2f}, 1);
  ModelHandle copy = model;
  copy.parameter("head.bias").var->value.fill(5.0f);
  EXPECT_EQ(model.parameter("head.bias").var->value[0], 0.0f);
}

TEST(Checkpoint, FlippedMagicIsCorrupt) {
  const fs::path path = temp_file("magic.ckpt");
  save_checkpoint(build_model(Role::kDiscriminator, DiscriminatorConfig{2, 4, 0.2f}), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    char c;
    f.read(&c, 1);
    f.seekp(0);
    c = static_cast<char>(~c);
    f.write(&c, 1);
  }
  EXPECT_THROW(load_checkpoint(path), CorruptFile);
}

TEST(Checkpoint, WrongVersionIsRejected) {
  const fs::path path = temp_file("version.ckpt");
  save_checkpoint(build_model(Role::kDiscriminator, DiscriminatorConfig{2, 4, 0.2f}), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = kCheckpointVersion + 1;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const CorruptFile& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, FlippedPayloadByteFailsChecksum) {
  const fs::path path = temp_file("payload.ckpt");
  save_checkpoint(build_model(Role::kDiscriminator, DiscriminatorConfig{2, 4, 0.2f}, 3), path);
  const auto size = fs::file_size(path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(static_cast<std::streamoff>(size - 20));
    char c;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 1);
    f.seekp(static_cast<std::streamoff>(size - 20));
    f.write(&c, 1);
  }
  EXPECT_THROW(load_checkpoint(path), CorruptFile);
}

TEST(Checkpoint, TruncatedFileIsCorrupt) {
  const fs::path path = temp_file("truncated.ckpt");
  save_checkpoint(build_model(Role::kDiscriminator, DiscriminatorConfig{2, 4, 0.2f}, 3), path);
  fs::resize_file(path, fs::file_size(path) / 2);
  EXPECT_THROW(load_checkpoint(path), CorruptFile);
}

TEST(Checkpoint, MissingFileIsIoError) { EXPECT_THROW(load_checkpoint(temp_file("absent.ckpt")), IoError); }

TEST(Checkpoint, ExpectedConfigIsEnforced) {
  const NestedUNetConfig depth4{4, 4, 3, "transposed", false};
  const fs::path path = temp_file("despeckler.ckpt");
  save_checkpoint(build_model(Role::kDespeckler, depth4), path);
  EXPECT_NO_THROW(load_checkpoint(path, Role::kDespeckler, depth4));
  EXPECT_THROW(load_checkpoint(path, Role::kDespeckler, NestedUNetConfig{3, 4, 3, "transposed", false}),
               ConfigMismatch);
  EXPECT_THROW(load_checkpoint(path, Role::kG1, depth4), ConfigMismatch);
}

TEST(Roles, NamesRoundTrip) {
  for (Role r : {Role::kG1, Role::kG2, Role::kDiscriminator, Role::kDespeckler}) EXPECT_EQ(parse_role(role_name(r)), r);
  EXPECT_THROW(parse_role("critic2"), InvalidArgument);
}
