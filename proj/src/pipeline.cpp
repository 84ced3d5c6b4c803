#include "psd/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "psd/data_io.hpp"
#include "psd/error.hpp"
#include "psd/random.hpp"

namespace psd {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSpeckleTag = 0x53504b4cULL;
constexpr std::uint64_t kAdversarialTag = 0x41445653ULL;
constexpr std::uint64_t kModelInitTag = 0x494e4954ULL;
constexpr std::uint64_t kPairsTag = 0x50525331ULL;
constexpr std::uint64_t kN2NTag = 0x4e324e31ULL;
constexpr std::uint64_t kPsdiTag = 0x50534449ULL;

constexpr const char* kNormalizationNote =
    "integer rasters divided by the format maximum; float rasters kept as stored";

// Errors caused by configuration values are usage errors, not runtime failures.
template <class F>
auto as_config(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

const std::string& require(const RunConfig& config, std::string_view key) {
  const std::string& v = config.get(key);
  if (v.empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
  return v;
}

fs::path prepare_output(const RunConfig& config, std::string_view command) {
  const fs::path out = config.get("out");
  if (out.empty()) throw ConfigError("missing required setting 'out'");
  fs::create_directories(out);
  config.write(out / (std::string(command) + ".resolved.cfg"));
  return out;
}

int int_setting(const RunConfig& config, std::string_view key, long long lo, long long hi = 1LL << 30) {
  const long long v = config.get_int(key);
  if (v < lo || v > hi) {
    throw ConfigError("setting '" + std::string(key) + "' = " + std::to_string(v) + " is outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

ExportDepth depth_setting(const RunConfig& config, std::string_view key) {
  return as_config([&] { return parse_export_depth(config.get(key)); });
}

ModelHandle load_model(const RunConfig& config) { return load_checkpoint(require(config, "model")); }

// Images of a dataset directory or a single file, keyed by id.
std::vector<DatasetItem> load_items(const fs::path& path) {
  if (fs::is_directory(path)) return read_dataset(path).items;
  if (!fs::exists(path)) throw IoError("no such file or directory '" + path.string() + "'");
  DatasetItem item;
  item.id = path.stem().string();
  item.image = load_image(path);
  item.source = path.string();
  return {std::move(item)};
}

const DatasetItem& match(const std::vector<DatasetItem>& items, const std::string& id, const std::string& what) {
  if (items.size() == 1) return items.front();
  for (const auto& item : items) {
    if (item.id == id) return item;
  }
  throw InvalidArgument("no " + what + " image with id '" + id + "'");
}

MetricReport summarize(const std::vector<MetricReport>& reports, std::string reference, std::string test) {
  MetricReport summary{std::move(reference), std::move(test), {}};
  struct Acc {
    std::string metric;
    std::vector<std::string> regions;
    double sum = 0.0, skipped = 0.0;
    int count = 0;
    bool saturated = false;
  };
  std::vector<Acc> acc;
  for (const MetricReport& r : reports) {
    for (const MetricEntry& e : r.entries) {
      auto it = std::find_if(acc.begin(), acc.end(),
                             [&](const Acc& a) { return a.metric == e.metric && a.regions == e.regions; });
      if (it == acc.end()) {
        acc.push_back({e.metric, e.regions});
        it = std::prev(acc.end());
      }
      it->sum += e.result.value;
      it->skipped += e.result.skipped_fraction;
      it->saturated = it->saturated || e.result.saturated;
      ++it->count;
    }
  }
  for (const Acc& a : acc) {
    summary.entries.push_back({a.metric, a.regions, {a.sum / a.count, a.saturated, a.skipped / a.count}});
  }
  return summary;
}

}  // namespace

NestedUNetConfig unet_config(const RunConfig& config) {
  NestedUNetConfig c;
  c.depth = int_setting(config, "net.depth", 1, 8);
  c.base_channels = int_setting(config, "net.base_channels", 1, 1024);
  c.kernel = int_setting(config, "net.kernel", 1, 15);
  c.upsample = config.get("net.upsample");
  c.use_batch_norm = config.get_bool("net.batch_norm");
  as_config([&] { return ModelHandle(Role::kDespeckler, c, 0).parameter_count(); });
  return c;
}

DnCNNConfig dncnn_config(const RunConfig& config) {
  DnCNNConfig c;
  c.depth = int_setting(config, "g2.depth", 3, 256);
  c.channels = int_setting(config, "g2.channels", 1, 1024);
  c.residual = config.get_bool("g2.residual");
  c.batch_norm = config.get_bool("g2.batch_norm");
  return c;
}

DiscriminatorConfig critic_config(const RunConfig& config) {
  DiscriminatorConfig c;
  c.conv_stages = int_setting(config, "critic.stages", 1, 8);
  c.base_channels = int_setting(config, "critic.base_channels", 1, 1024);
  c.slope = static_cast<float>(config.get_double("critic.slope"));
  if (!(c.slope >= 0.0f)) throw ConfigError("critic.slope must be >= 0");
  return c;
}

AdversarialConfig adversarial_config(const RunConfig& config) {
  AdversarialConfig c;
  c.critic_iterations = int_setting(config, "adv.critic_iterations", 1);
  c.clip_value = static_cast<float>(config.get_double("adv.clip"));
  c.alpha = config.get_double("adv.alpha");
  c.epochs = int_setting(config, "adv.epochs", 1);
  c.batch_size = int_setting(config, "adv.batch_size", 1);
  c.gen_optimizer = {config.get_double("adv.gen_lr"), config.get_double("adv.beta1"), config.get_double("adv.beta2"),
                     config.get_double("adv.eps")};
  c.critic_optimizer = {config.get_double("adv.critic_lr"), config.get_double("adv.rmsprop_alpha"),
                        config.get_double("adv.eps")};
  c.lr_halving_epochs = int_setting(config, "adv.lr_halving_epochs", 1);
  c.pair_looks = config.get_double("adv.pair_looks");
  as_config([&] { c.validate(); return 0; });
  return c;
}

N2NConfig n2n_config(const RunConfig& config) {
  N2NConfig c;
  c.epochs = int_setting(config, "n2n.epochs", 1);
  c.batch_size = int_setting(config, "n2n.batch_size", 1);
  c.optimizer = {config.get_double("n2n.lr"), config.get_double("adv.beta1"), config.get_double("adv.beta2"),
                 config.get_double("adv.eps")};
  c.lr_halving_epochs = int_setting(config, "n2n.lr_halving_epochs", 1);
  c.looks_choices = config.get_doubles("pairs.looks");
  const std::string& mode = config.get("n2n.pair_mode");
  if (mode == "online") {
    c.pair_mode = PairMode::kOnline;
  } else if (mode == "fixed") {
    c.pair_mode = PairMode::kFixed;
  } else {
    throw ConfigError("n2n.pair_mode must be online or fixed, got '" + mode + "'");
  }
  c.fine_tune = config.get_bool("n2n.fine_tune");
  c.architecture = unet_config(config);
  as_config([&] { c.validate(); return 0; });
  return c;
}

std::vector<Image> load_training_images(const fs::path& dir, int patch_size, int stride) {
  const Dataset ds = read_dataset(dir);
  if (ds.items.empty()) throw InvalidArgument("no images found in '" + dir.string() + "'");
  std::vector<Image> out;
  if (patch_size > 0) {
    for (const auto& item : ds.items) {
      auto patches = crop_patches(item.image, patch_size, stride > 0 ? stride : patch_size);
      out.insert(out.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    return out;
  }
  for (const auto& item : ds.items) {
    if (!item.image.same_shape(ds.items.front().image)) {
      throw ShapeError("training images differ in size ('" + item.id + "'); set patch.size to crop them");
    }
    out.push_back(item.image);
  }
  return out;
}

void write_pairs(const std::vector<S2SPair>& pairs, const fs::path& dir, std::string_view producer_role) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["producer_role"] = producer_role;
  manifest["count"] = pairs.size();
  manifest["items"] = nlohmann::ordered_json::array();
  char name[32];
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const S2SPair& p = pairs[i];
    std::snprintf(name, sizeof(name), "pair_%05zu", i);
    const std::string stem = name;
    export_image(p.first, dir / (stem + "_first.pfm"), ExportDepth::kRawFloat);
    export_image(p.second, dir / (stem + "_second.pfm"), ExportDepth::kRawFloat);
    export_image(p.base, dir / (stem + "_base.pfm"), ExportDepth::kRawFloat);
    nlohmann::ordered_json item;
    item["index"] = i;
    item["looks"] = p.looks.value();
    item["seed1"] = p.seed1;
    item["seed2"] = p.seed2;
    item["base_hash"] = p.base_hash;
    item["first"] = stem + "_first.pfm";
    item["second"] = stem + "_second.pfm";
    item["base"] = stem + "_base.pfm";
    manifest["items"].push_back(std::move(item));
  }
  std::ofstream os(dir / "pairs.json", std::ios::trunc);
  if (!os) throw IoError("cannot write '" + (dir / "pairs.json").string() + "'");
  os << manifest.dump(2) << '\n';
}

std::vector<S2SPair> read_pairs(const fs::path& dir) {
  const fs::path path = dir / "pairs.json";
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<S2SPair> pairs;
  try {
    const auto manifest = nlohmann::json::parse(is);
    for (const auto& item : manifest.at("items")) {
      S2SPair p;
      p.first = load_raw_float(dir / item.at("first").get<std::string>());
      p.second = load_raw_float(dir / item.at("second").get<std::string>());
      p.base = load_raw_float(dir / item.at("base").get<std::string>());
      p.looks = LookCount(item.at("looks").get<double>());
      p.seed1 = item.at("seed1").get<std::uint64_t>();
      p.seed2 = item.at("seed2").get<std::uint64_t>();
      p.base_hash = item.at("base_hash").get<std::uint64_t>();
      if (content_hash(p.base) != p.base_hash) {
        throw CorruptFile("pair " + std::to_string(pairs.size()) + " base does not match its recorded hash");
      }
      pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile("'" + path.string() + "': " + e.what());
  }
  return pairs;
}

void cmd_synth(const RunConfig& config) {
  const Recipe recipe = as_config([&] { return parse_recipe(config.get("synth.recipe")); });
  const int count = int_setting(config, "synth.count", 1);
  const int size = int_setting(config, "synth.size", kMinSynthSize, 1 << 14);
  const double looks = config.get_double("synth.looks");
  const ExportDepth depth = depth_setting(config, "synth.depth");
  const std::uint64_t seed = config.get_u64("seed");
  const fs::path out = prepare_output(config, "synth");

  const Dataset clean = synthesize_corpus(recipe, count, size, seed);
  write_dataset(clean, out / "clean", depth, kNormalizationNote);
  if (looks > 0.0) {
    Dataset speckled = clean;
    const LookCount l = as_config([&] { return LookCount(looks); });
    for (std::size_t i = 0; i < speckled.items.size(); ++i) {
      DatasetItem& item = speckled.items[i];
      item.seed = derive_seed(seed, kSpeckleTag, i);
      item.image = speckle(item.image, l, item.seed);
      item.source = "speckle(L=" + config.get("synth.looks") + ") of clean/" + item.id;
    }
    write_dataset(speckled, out / "speckled", ExportDepth::kRawFloat, kNormalizationNote);
  }
}

void cmd_train_s2s(const RunConfig& config) {
  const NestedUNetConfig g1 = unet_config(config);
  const DnCNNConfig g2 = dncnn_config(config);
  const DiscriminatorConfig critic = critic_config(config);
  const AdversarialConfig adv = adversarial_config(config);
  const std::uint64_t seed = config.get_u64("seed");
  const int stop = config.get_int("adv.stop_epoch") > 0 ? int_setting(config, "adv.stop_epoch", 1, adv.epochs) : adv.epochs;
  const fs::path data = require(config, "data");
  const fs::path out = prepare_output(config, "train-s2s");
  const auto images = load_training_images(data, int_setting(config, "patch.size", 0),
                                           int_setting(config, "patch.stride", 0));

  int first = 1;
  std::int64_t step = 0;
  std::optional<AdversarialModels> models;
  if (const fs::path resume = config.get("adv.resume"); !resume.empty()) {
    models = AdversarialModels{load_checkpoint(resume / "g1.ckpt", Role::kG1, g1),
                               load_checkpoint(resume / "g2.ckpt", Role::kG2, g2),
                               load_checkpoint(resume / "critic.ckpt", Role::kDiscriminator, critic)};
    const auto& meta = models->g1.metadata();
    if (!meta.count("epoch") || !meta.count("step")) throw CorruptFile("resume checkpoint lacks step/epoch metadata");
    first = std::stoi(meta.at("epoch")) + 1;
    step = std::stoll(meta.at("step"));
    if (first > stop) throw ConfigError("resume checkpoint already finished epoch " + meta.at("epoch"));
  } else {
    models = build_adversarial_models(g1, g2, critic, derive_seed(seed, kModelInitTag));
  }
  AdversarialTrainer trainer(std::move(*models), adv, derive_seed(seed, kAdversarialTag));
  trainer.set_next_step(step);
  trainer.train(images, first, stop);
  save_checkpoint(trainer.models().g1, out / "g1.ckpt");
  save_checkpoint(trainer.models().g2, out / "g2.ckpt");
  save_checkpoint(trainer.models().critic, out / "critic.ckpt");
  const fs::path log_path = out / "train-s2s.log.jsonl";
  if (const fs::path resume = config.get("adv.resume"); !resume.empty()) {
    // Carry the records of the resumed run so the log covers every epoch.
    TrainLog earlier;
    if (fs::exists(resume / "train-s2s.log.jsonl")) {
      for (const TrainRecord& r : TrainLog::read_jsonl(resume / "train-s2s.log.jsonl").records()) {
        if (r.step < step) earlier.append(r);
      }
    }
    earlier.write_jsonl(log_path);
    trainer.log().write_jsonl(log_path, true);
  } else {
    trainer.log().write_jsonl(log_path);
  }
}

void cmd_gen_pairs(const RunConfig& config) {
  const auto looks = config.get_doubles("pairs.looks");
  const std::uint64_t seed = config.get_u64("seed");
  const fs::path data = require(config, "data");
  const ModelHandle model = load_model(config);
  const fs::path out = prepare_output(config, "gen-pairs");
  const auto images = load_training_images(data, int_setting(config, "patch.size", 0),
                                           int_setting(config, "patch.stride", 0));
  PairGenerationStats stats;
  const auto pairs =
      as_config([&] { return generate_s2s_dataset(model, images, looks, derive_seed(seed, kPairsTag), &stats); });
  write_pairs(pairs, out / "pairs", role_name(model.role()));
  std::ofstream(out / "gen-pairs.stats.json")
      << nlohmann::json{{"clamped_pixels", stats.clamped_pixels}, {"total_pixels", stats.total_pixels}}.dump(2)
      << '\n';
}

void cmd_train_n2n(const RunConfig& config) {
  const N2NConfig n2n = n2n_config(config);
  const std::uint64_t seed = config.get_u64("seed");
  const fs::path pairs_dir = require(config, "pairs");
  const fs::path out = prepare_output(config, "train-n2n");
  const auto pairs = read_pairs(pairs_dir);
  const N2NResult result = train_despeckler(pairs, n2n, derive_seed(seed, kN2NTag));
  save_checkpoint(result.despeckler, out / "despeckler.ckpt");
  result.log.write_jsonl(out / "train-n2n.log.jsonl");
}

void cmd_psdi(const RunConfig& config) {
  const N2NConfig n2n = n2n_config(config);
  const int rounds = int_setting(config, "psdi.rounds", 1, 64);
  const std::uint64_t seed = config.get_u64("seed");
  const fs::path data = require(config, "data");
  ModelHandle current = load_checkpoint(require(config, "model"), Role::kDespeckler, n2n.architecture);
  const fs::path out = prepare_output(config, "psdi");
  const auto images = load_training_images(data, int_setting(config, "patch.size", 0),
                                           int_setting(config, "patch.stride", 0));
  for (int r = 1; r <= rounds; ++r) {
    N2NResult result = psdi_round(current, images, n2n, derive_seed(seed, kPsdiTag, r));
    const fs::path round_dir = out / ("psdi_round" + std::to_string(r));
    fs::create_directories(round_dir);
    write_pairs(result.pairs, round_dir / "pairs", role_name(Role::kDespeckler));
    save_checkpoint(result.despeckler, round_dir / "despeckler.ckpt");
    result.log.write_jsonl(round_dir / "train-n2n.log.jsonl");
    current = std::move(result.despeckler);
  }
  save_checkpoint(current, out / "despeckler_psdi.ckpt");
}

void cmd_despeckle(const RunConfig& config) {
  const fs::path input = require(config, "input");
  const ExportDepth depth = depth_setting(config, "export.depth");
  const ModelHandle model = load_model(config);
  if (model.role() != Role::kDespeckler && model.role() != Role::kG1) {
    throw ConfigError("despeckle needs a despeckler or g1 checkpoint, got '" + std::string(role_name(model.role())) + "'");
  }
  const fs::path out = prepare_output(config, "despeckle");
  const bool is_float = depth == ExportDepth::kFloat || depth == ExportDepth::kRawFloat;
  if (fs::is_directory(input)) {
    Dataset ds = read_dataset(input);
    for (auto& item : ds.items) {
      item.image = despeckle(model, item.image);
      item.source = "despeckled " + item.source;
    }
    write_dataset(ds, out / "despeckled", depth, kNormalizationNote);
  } else {
    const Image result = despeckle(model, load_image(input));
    export_image(result, out / (input.stem().string() + "_despeckled" + (is_float ? ".pfm" : ".png")), depth);
  }
}

MetricReport cmd_eval(const RunConfig& config) {
  const fs::path despeckled_path = require(config, "eval.despeckled");
  const std::string clean_path = config.get("eval.clean");
  const std::string original_path = config.get("eval.original");
  const std::string regions_path = config.get("eval.regions");
  const double peak = config.get_double("eval.peak");
  if (clean_path.empty() && original_path.empty()) {
    throw ConfigError("eval needs eval.clean (PSNR/SSIM) and/or eval.original with eval.regions (ENL/EPD-ROA/TCR/MoR)");
  }
  if (!original_path.empty() && regions_path.empty() && !fs::is_directory(original_path)) {
    throw ConfigError("eval.original requires eval.regions");
  }
  const fs::path out = prepare_output(config, "eval");

  const auto despeckled = load_items(despeckled_path);
  const auto clean = clean_path.empty() ? std::vector<DatasetItem>{} : load_items(clean_path);
  const auto original = original_path.empty() ? std::vector<DatasetItem>{} : load_items(original_path);

  std::vector<MetricReport> reports;
  for (const DatasetItem& d : despeckled) {
    MetricReport report{"", d.id, {}};
    if (!clean.empty()) {
      const DatasetItem& c = match(clean, d.id, "clean");
      report = full_reference_report(c.image, d.image, c.id, d.id, peak);
    }
    if (!original.empty()) {
      const DatasetItem& o = match(original, d.id, "original");
      std::vector<Region> regions;
      if (regions_path.empty()) {
        regions = o.regions;
      } else if (fs::is_directory(regions_path)) {
        regions = read_regions(fs::path(regions_path) / (d.id + ".regions.txt"));
      } else {
        regions = read_regions(regions_path);
      }
      if (regions.empty()) throw InvalidArgument("no regions available for '" + d.id + "'");
      MetricReport nr = no_reference_report(o.image, d.image, regions, o.id, d.id);
      if (report.reference_id.empty()) report.reference_id = nr.reference_id;
      report.entries.insert(report.entries.end(), nr.entries.begin(), nr.entries.end());
    }
    reports.push_back(std::move(report));
  }
  const std::string reference = !clean_path.empty() ? clean_path : original_path;
  MetricReport summary = reports.size() == 1 ? reports.front() : summarize(reports, reference, despeckled_path.string());

  nlohmann::ordered_json j;
  j["summary"] = nlohmann::ordered_json::parse(summary.to_json());
  j["items"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) j["items"].push_back(nlohmann::ordered_json::parse(r.to_json()));
  std::ofstream os(out / "eval.json", std::ios::trunc);
  if (!os) throw IoError("cannot write eval report");
  os << j.dump(2) << '\n';
  std::cout << summary.to_json() << std::endl;
  return summary;
}

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names{"synth",   "train-s2s", "gen-pairs", "train-n2n",
                                                   "psdi",    "despeckle", "eval"};
  return names;
}

void run_command(std::string_view name, const RunConfig& config) {
  if (name == "synth") return cmd_synth(config);
  if (name == "train-s2s") return cmd_train_s2s(config);
  if (name == "gen-pairs") return cmd_gen_pairs(config);
  if (name == "train-n2n") return cmd_train_n2n(config);
  if (name == "psdi") return cmd_psdi(config);
  if (name == "despeckle") return cmd_despeckle(config);
  if (name == "eval") {
    cmd_eval(config);
    return;
  }
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

}  // namespace psd
