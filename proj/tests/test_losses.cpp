#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "psd/error.hpp"
#include "psd/losses.hpp"
#include "psd/random.hpp"
#include "psd/speckle.hpp"

using namespace psd;

namespace {

Tensor batch_of(std::vector<float> values, int h, int w) {
  Tensor t(static_cast<int>(values.size()) / (h * w), 1, h, w);
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

// Literal isotropic TV in double, no smoothing term.
double tv_oracle(const std::vector<double>& p, int w, int h) {
  double s = 0.0;
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const double dx = p[y * w + x + 1] - p[y * w + x];
      const double dy = p[(y + 1) * w + x] - p[y * w + x];
      s += std::sqrt(dx * dx + dy * dy);
    }
  return s;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Philox rng(seed);
  std::vector<float> px(static_cast<std::size_t>(w) * h);
  for (float& v : px) v = static_cast<float>(rng.uniform());
  return Image(w, h, px);
}

void expect_rel(double actual, double expected, double tol = 1e-6) {
  EXPECT_LE(std::fabs(actual - expected), tol * std::max(1.0, std::fabs(expected))) << actual << " vs " << expected;
}

}  // namespace

TEST(WganLoss, HandFixture) {
  const std::vector<float> real{1.0f, 3.0f}, fake{0.0f, 2.0f};
  expect_rel(wgan_loss(real, fake).value, 1.0);
  expect_rel(wgan_loss(fake, real).value, -1.0);
}

TEST(WganLoss, EqualScoresGiveZero) {
  const std::vector<float> a(5, 0.3f);
  EXPECT_EQ(wgan_loss(a, a).value, 0.0);
}

TEST(WganLoss, Antisymmetry) {
  const std::vector<float> a{0.1f, -0.4f, 2.5f}, b{1.5f, 0.25f};
  EXPECT_EQ(wgan_loss(a, b).value, -wgan_loss(b, a).value);
}

TEST(WganLoss, EmptyBatchRejected) {
  const std::vector<float> a{1.0f}, none;
  EXPECT_THROW(wgan_loss(none, a), InvalidArgument);
  EXPECT_THROW(wgan_loss(a, none), InvalidArgument);
}

TEST(CycleLoss, HandFixture) {
  expect_rel(cycle_loss(batch_of({1, 2, 3, 4}, 2, 2), batch_of({1, 1, 3, 5}, 2, 2)).value, 0.5);
}

TEST(CycleLoss, IdentitySymmetryAndHomogeneity) {
  Philox rng(2);
  Tensor a(3, 1, 5, 7), b(3, 1, 5, 7);
  for (float& v : a.span()) v = static_cast<float>(rng.uniform());
  for (float& v : b.span()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(cycle_loss(a, a).value, 0.0);
  EXPECT_EQ(cycle_loss(a, b).value, cycle_loss(b, a).value);
  Tensor a4 = a, b4 = b;
  for (float& v : a4.span()) v *= 4.0f;
  for (float& v : b4.span()) v *= 4.0f;
  expect_rel(cycle_loss(a4, b4).value, 4.0 * cycle_loss(a, b).value);
}

TEST(CycleLoss, ShapeMismatch) { EXPECT_THROW(cycle_loss(Tensor(1, 1, 2, 2), Tensor(1, 1, 2, 3)), ShapeError); }

TEST(TvLoss, HandFixture) {
  // Top row 0, bottom row 1: one term sqrt(0 + 1).
  expect_rel(tv_loss(Image(2, 2, std::vector<float>{0, 0, 1, 1})).value, 1.0);
}

TEST(TvLoss, ConstantIsZeroAndLastRowColumnExcluded) {
  EXPECT_NEAR(tv_loss(Image(6, 4, 0.7f)).value, 0.0, 1e-3);
  // The bottom-right pixel is nobody's right or lower neighbour inside the
  // summed range, so changing it leaves the sum flat.
  Image img(4, 4, 0.0f);
  img.at(3, 3) = 1.0f;
  EXPECT_NEAR(tv_loss(img).value, 0.0, 1e-3);
}

TEST(TvLoss, MatchesLiteralSum) {
  const Image img = random_image(9, 6, 4);
  std::vector<double> p(img.pixels().begin(), img.pixels().end());
  expect_rel(tv_loss(img).value, tv_oracle(p, 9, 6), 1e-6);
}

TEST(TvLoss, TranspositionInvariant) {
  const Image img = random_image(7, 5, 8);
  Image t(5, 7);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) t.at(y, x) = img.at(x, y);
  expect_rel(tv_loss(img).value, tv_loss(t).value, 1e-12);
}

TEST(TvLoss, TooSmallRejected) {
  EXPECT_THROW(tv_loss(Image(1, 5)), InvalidArgument);
  EXPECT_THROW(tv_loss(Image(5, 1)), InvalidArgument);
}

TEST(TvLoss, GradientMatchesCentralDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Image img = random_image(8, 8, seed);
    const Image grad = tv_loss_gradient(img);
    std::vector<double> p(img.pixels().begin(), img.pixels().end());
    const double h = 1e-4;
    for (int i = 0; i < 64; ++i) {
      std::vector<double> up = p, down = p;
      up[i] += h;
      down[i] -= h;
      const double numeric = (tv_oracle(up, 8, 8) - tv_oracle(down, 8, 8)) / (2 * h);
      const double analytic = grad.pixels()[i];
      EXPECT_LT(std::fabs(analytic - numeric), 1e-4 * std::max(std::fabs(numeric), 1.0))
          << "seed " << seed << " pixel " << i << ": " << analytic << " vs " << numeric;
    }
  }
}

TEST(MseLoss, HandFixtures) {
  expect_rel(mse_loss(batch_of({0, 2}, 1, 2), batch_of({1, 1}, 1, 2)).value, 1.0);
  Tensor a(2, 1, 3, 3, 0.25f), b(2, 1, 3, 3, 1.25f);
  expect_rel(mse_loss(a, b).value, 1.0);
  EXPECT_EQ(mse_loss(a, a).value, 0.0);
}

TEST(MseLoss, Symmetric) {
  Philox rng(5);
  Tensor a(2, 1, 4, 4), b(2, 1, 4, 4);
  for (float& v : a.span()) v = static_cast<float>(rng.uniform());
  for (float& v : b.span()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(mse_loss(a, b).value, mse_loss(b, a).value);
  EXPECT_THROW(mse_loss(a, Tensor(1, 1, 4, 4)), ShapeError);
}

TEST(MseLoss, GradientMatchesCentralDifferences) {
  Philox rng(6);
  Tensor t(2, 1, 3, 3), p(2, 1, 3, 3);
  for (float& v : t.span()) v = static_cast<float>(rng.uniform());
  for (float& v : p.span()) v = static_cast<float>(rng.uniform());
  const Tensor g = mse_loss_gradient(t, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    // Closed form of the centred difference of a quadratic: exact.
    const double numeric = 2.0 * (static_cast<double>(p[i]) - t[i]) / static_cast<double>(p.size());
    EXPECT_NEAR(g[i], numeric, 1e-4 * std::max(1.0, std::fabs(numeric)));
  }
}

TEST(CycleLoss, GradientMatchesCentralDifferences) {
  Tensor o(1, 1, 2, 3), r(1, 1, 2, 3);
  const std::vector<float> ov{0.1f, 0.5f, 0.9f, 0.3f, 0.3f, 0.7f}, rv{0.2f, 0.4f, 0.95f, 0.1f, 0.6f, 0.7f};
  std::copy(ov.begin(), ov.end(), o.data());
  std::copy(rv.begin(), rv.end(), r.data());
  const Tensor g = cycle_loss_gradient(o, r);
  for (std::size_t i = 0; i < 6; ++i) {
    const double d = static_cast<double>(rv[i]) - ov[i];
    const double expected = d > 0 ? 1.0 / 6 : (d < 0 ? -1.0 / 6 : 0.0);
    EXPECT_NEAR(g[i], expected, 1e-7);
  }
}

TEST(GeneratorObjective, HandFixtures) {
  const LossValue w{1.0, {}, {}}, c{0.5, {}, {}}, t{2.0, {}, {}};
  const LossValue total = generator_objective(w, c, t, 0.1);
  expect_rel(total.value, 1.7);
  EXPECT_EQ(total.components.at("wgan"), 1.0);
  EXPECT_EQ(total.components.at("cycle"), 0.5);
  EXPECT_EQ(total.components.at("tv"), 2.0);
  EXPECT_EQ(total.weights.at("tv"), 0.1);
  double recomposed = 0.0;
  for (const auto& [name, value] : total.components) recomposed += total.weights.at(name) * value;
  EXPECT_NEAR(total.value, recomposed, 1e-15);
  EXPECT_EQ(generator_objective(w, c, t, 0.0).value, 1.5);
  EXPECT_EQ(generator_objective({}, {}, {}, 0.1).value, 0.0);
  EXPECT_THROW(generator_objective(w, c, t, -0.1), InvalidArgument);
}

TEST(MseMinimizer, ConstantPredictorConvergesToCleanValue) {
  // Brute-force search over constant predictions for speckled targets of 0.6.
  Tensor targets(10000, 1, 1, 1);
  const auto noise = sample_speckle_field(10000, 1, LookCount(1), 2024);
  double sample_mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    targets[i] = 0.6f * noise.values[i];
    sample_mean += targets[i];
  }
  sample_mean /= 10000;
  double best = 0.0, best_loss = 1e300;
  for (int k = 0; k <= 1000; ++k) {
    const double c = 0.3 + 0.0006 * k;
    const double loss = mse_loss(targets, Tensor(10000, 1, 1, 1, static_cast<float>(c))).value;
    if (loss < best_loss) {
      best_loss = loss;
      best = c;
    }
  }
  EXPECT_NEAR(best, sample_mean, 0.0006);
  EXPECT_NEAR(best, 0.6, 0.012);
}
