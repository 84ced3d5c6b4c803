#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "psd/data_io.hpp"
#include "psd/error.hpp"
#include "psd/pipeline.hpp"
#include "psd/run_config.hpp"
#include "psd/speckle.hpp"

using namespace psd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "psd_test_config";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(RunConfigTest, DefaultsFollowTheTrainingRecipe) {
  const RunConfig c;
  EXPECT_EQ(c.get_int("adv.critic_iterations"), 5);
  EXPECT_EQ(c.get_double("adv.clip"), 0.02);
  EXPECT_EQ(c.get_double("adv.alpha"), 0.1);
  EXPECT_EQ(c.get_int("adv.epochs"), 16);
  EXPECT_EQ(c.get_int("adv.batch_size"), 16);
  EXPECT_EQ(c.get_double("adv.gen_lr"), 1e-4);
  EXPECT_EQ(c.get_double("adv.critic_lr"), 5e-5);
  EXPECT_EQ(c.get_int("adv.lr_halving_epochs"), 8);
  EXPECT_EQ(c.get_doubles("pairs.looks"), (std::vector<double>{1, 2, 4, 8, 16}));
  EXPECT_FALSE(c.get_bool("net.batch_norm"));
  EXPECT_TRUE(c.get_bool("g2.batch_norm"));
  EXPECT_EQ(c.get_int("psdi.rounds"), 1);
}

TEST(RunConfigTest, UnknownKeysAndBadValuesRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("adv.critic_iteration", "5"), ConfigError);
  EXPECT_THROW(c.set("adv.epochs", "many"), ConfigError);
  EXPECT_THROW(c.set("seed", "-1"), ConfigError);
  EXPECT_THROW(c.set("net.batch_norm", "maybe"), ConfigError);
  EXPECT_THROW(c.set("pairs.looks", "1,x"), ConfigError);
  EXPECT_THROW(c.get("nonsense"), ConfigError);
  EXPECT_EQ(c.get_int("adv.epochs"), 16);
}

TEST(RunConfigTest, FileThenOverridePrecedence) {
  const fs::path path = scratch("run.cfg");
  {
    std::ofstream os(path);
    os << "# desk run\nseed = 11\nadv.epochs = 3   # short\n\nnet.depth=2\n";
  }
  RunConfig c;
  c.load_file(path);
  c.set("adv.epochs", "4");
  EXPECT_EQ(c.get_u64("seed"), 11u);
  EXPECT_EQ(c.get_int("adv.epochs"), 4);
  EXPECT_EQ(c.get_int("net.depth"), 2);
  RunConfig round;
  round.load_string(c.to_string());
  EXPECT_EQ(round.to_string(), c.to_string());
}

TEST(RunConfigTest, MalformedFilesRejected) {
  RunConfig c;
  EXPECT_THROW(c.load_string("just words\n"), ConfigError);
  EXPECT_THROW(c.load_string("bogus.key = 1\n"), ConfigError);
  EXPECT_THROW(c.load_file(scratch("missing.cfg")), ConfigError);
}

TEST(RunConfigTest, EveryKeyIsDescribed) {
  for (const auto& [key, value] : RunConfig::defaults()) EXPECT_FALSE(RunConfig::describe(key).empty()) << key;
}

TEST(TypedViews, MapSettingsOntoComponentConfigs) {
  RunConfig c;
  c.set("net.depth", "2");
  c.set("net.base_channels", "16");
  c.set("adv.gen_lr", "1e-3");
  c.set("n2n.pair_mode", "fixed");
  EXPECT_EQ(unet_config(c), (NestedUNetConfig{2, 16, 3, "transposed", false}));
  EXPECT_EQ(adversarial_config(c).gen_optimizer.lr, 1e-3);
  EXPECT_EQ(adversarial_config(c).critic_optimizer.alpha, 0.99);
  EXPECT_EQ(n2n_config(c).pair_mode, PairMode::kFixed);
  EXPECT_EQ(n2n_config(c).architecture, unet_config(c));
  c.set("net.depth", "0");
  EXPECT_THROW(unet_config(c), ConfigError);
  c.set("net.depth", "2");
  c.set("n2n.pair_mode", "sometimes");
  EXPECT_THROW(n2n_config(c), ConfigError);
}

TEST(PairFiles, RoundTripAndTamperDetection) {
  std::vector<S2SPair> pairs;
  for (int i = 0; i < 3; ++i) {
    const Image base(8, 6, 0.2f + 0.1f * static_cast<float>(i));
    pairs.push_back(make_s2s_pair(base, LookCount(i + 1), 10 + 2 * i, 11 + 2 * i));
  }
  const fs::path dir = scratch("pairs");
  fs::remove_all(dir);
  write_pairs(pairs, dir, "g1");
  const auto back = read_pairs(dir);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(content_hash(back[i].first), content_hash(pairs[i].first));
    EXPECT_EQ(content_hash(back[i].second), content_hash(pairs[i].second));
    EXPECT_EQ(back[i].base_hash, pairs[i].base_hash);
    EXPECT_EQ(back[i].looks, pairs[i].looks);
    EXPECT_EQ(back[i].seed1, pairs[i].seed1);
  }
  export_image(Image(8, 6, 0.9f), dir / "pair_00001_base.pfm", ExportDepth::kRawFloat);
  EXPECT_THROW(read_pairs(dir), CorruptFile);
}

TEST(Commands, NamesAndUnknownCommand) {
  const auto& names = command_names();
  for (const char* n : {"synth", "train-s2s", "gen-pairs", "train-n2n", "psdi", "despeckle", "eval"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  EXPECT_THROW(run_command("train", RunConfig()), ConfigError);
}

TEST(Commands, SynthWritesCorpusAndResolvedConfig) {
  RunConfig c;
  const fs::path out = scratch("synth_run");
  fs::remove_all(out);
  c.set("out", out.string());
  c.set("synth.count", "3");
  c.set("synth.size", "64");
  c.set("synth.looks", "1");
  c.set("seed", "11");
  cmd_synth(c);
  EXPECT_TRUE(fs::exists(out / "synth.resolved.cfg"));
  const auto clean = read_dataset(out / "clean");
  const auto noisy = read_dataset(out / "speckled");
  ASSERT_EQ(clean.items.size(), 3u);
  ASSERT_EQ(noisy.items.size(), 3u);
  EXPECT_FALSE(clean.items[0].regions.empty());
  EXPECT_EQ(clean.items[2].id, "img_00002");
  const auto expected = synthesize_corpus(Recipe::kShapes, 3, 64, 11);
  EXPECT_EQ(content_hash(clean.items[1].image), content_hash(expected.items[1].image));
  c.set("synth.recipe", "clouds");
  EXPECT_THROW(cmd_synth(c), ConfigError);
}
