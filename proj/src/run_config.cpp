#include "psd/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psd/error.hpp"

namespace psd {

namespace {

enum class Kind { kString, kInt, kUInt, kDouble, kBool, kList };

struct KeySpec {
  const char* key;
  const char* value;
  Kind kind;
  const char* help;
};

// Defaults follow the published training setup; desk-scale runs override them.
constexpr KeySpec kKeys[] = {
    {"seed", "0", Kind::kUInt, "master seed; every random draw derives from it"},
    {"out", "run", Kind::kString, "output directory"},

    {"synth.recipe", "shapes", Kind::kString, "piecewise-constant | gradient | shapes"},
    {"synth.count", "64", Kind::kInt, "number of synthetic images"},
    {"synth.size", "96", Kind::kInt, "side length of synthetic images (>= 64)"},
    {"synth.looks", "0", Kind::kDouble, "if > 0, also write speckled copies with this many looks"},
    {"synth.depth", "float", Kind::kString, "export depth of synthetic images: 8 | 16 | float"},

    {"data", "", Kind::kString, "directory of training images (train-s2s, gen-pairs, psdi)"},
    {"patch.size", "0", Kind::kInt, "crop training images into patches of this size (0 = whole images)"},
    {"patch.stride", "0", Kind::kInt, "patch stride (0 = patch.size)"},

    {"net.depth", "4", Kind::kInt, "nested unet depth (g1 and despeckler)"},
    {"net.base_channels", "32", Kind::kInt, "nested unet channels at level 0"},
    {"net.kernel", "3", Kind::kInt, "nested unet convolution kernel size"},
    {"net.upsample", "transposed", Kind::kString, "nested unet upsampling (transposed)"},
    {"net.batch_norm", "false", Kind::kBool, "batch norm inside nested unet blocks"},
    {"g2.depth", "8", Kind::kInt, "dncnn depth"},
    {"g2.channels", "64", Kind::kInt, "dncnn width"},
    {"g2.residual", "true", Kind::kBool, "dncnn residual connection"},
    {"g2.batch_norm", "true", Kind::kBool, "dncnn batch norm"},
    {"critic.stages", "4", Kind::kInt, "stride-2 convolution stages in the critic"},
    {"critic.base_channels", "64", Kind::kInt, "critic channels of the first stage"},
    {"critic.slope", "0.2", Kind::kDouble, "critic leaky relu slope"},

    {"adv.critic_iterations", "5", Kind::kInt, "critic steps per generator step"},
    {"adv.clip", "0.02", Kind::kDouble, "critic weight clipping bound"},
    {"adv.alpha", "0.1", Kind::kDouble, "weight of the total variation term"},
    {"adv.epochs", "16", Kind::kInt, "adversarial epochs (learning-rate schedule length)"},
    {"adv.stop_epoch", "0", Kind::kInt, "stop after this epoch (0 = adv.epochs)"},
    {"adv.batch_size", "16", Kind::kInt, "adversarial mini-batch size"},
    {"adv.gen_lr", "1e-4", Kind::kDouble, "generator Adam learning rate"},
    {"adv.critic_lr", "5e-5", Kind::kDouble, "critic RMSProp learning rate"},
    {"adv.beta1", "0.9", Kind::kDouble, "Adam beta1"},
    {"adv.beta2", "0.999", Kind::kDouble, "Adam beta2"},
    {"adv.eps", "1e-8", Kind::kDouble, "Adam / RMSProp epsilon"},
    {"adv.rmsprop_alpha", "0.99", Kind::kDouble, "RMSProp smoothing constant"},
    {"adv.lr_halving_epochs", "8", Kind::kInt, "halve learning rates every this many epochs"},
    {"adv.pair_looks", "1", Kind::kDouble, "looks of the speckle multiplied onto g1 output during training"},
    {"adv.resume", "", Kind::kString, "directory holding g1/g2/critic checkpoints to resume from"},

    {"model", "", Kind::kString, "checkpoint used by gen-pairs, psdi and despeckle"},
    {"pairs", "", Kind::kString, "pair directory used by train-n2n"},
    {"pairs.looks", "1,2,4,8,16", Kind::kList, "looks drawn uniformly per pair"},

    {"n2n.epochs", "16", Kind::kInt, "despeckler epochs"},
    {"n2n.batch_size", "16", Kind::kInt, "despeckler mini-batch size"},
    {"n2n.lr", "1e-4", Kind::kDouble, "despeckler Adam learning rate"},
    {"n2n.lr_halving_epochs", "8", Kind::kInt, "halve the despeckler learning rate every this many epochs"},
    {"n2n.pair_mode", "online", Kind::kString, "online (redraw speckle every epoch) | fixed"},
    {"n2n.fine_tune", "false", Kind::kBool, "PSDi rounds start from the previous despeckler"},
    {"psdi.rounds", "1", Kind::kInt, "number of PSDi rounds"},

    {"input", "", Kind::kString, "image file or directory to despeckle"},
    {"export.depth", "float", Kind::kString, "output depth of despeckled images: 8 | 16 | float"},

    {"eval.clean", "", Kind::kString, "clean reference (file or directory) for PSNR/SSIM"},
    {"eval.original", "", Kind::kString, "speckled original (file or directory) for ENL/EPD-ROA/TCR/MoR"},
    {"eval.despeckled", "", Kind::kString, "despeckled image (file or directory)"},
    {"eval.regions", "", Kind::kString, "region file (or directory of <id>.regions.txt files)"},
    {"eval.peak", "1.0", Kind::kDouble, "peak value for PSNR/SSIM"},
};

const KeySpec* find_spec(std::string_view key) {
  for (const KeySpec& s : kKeys) {
    if (key == s.key) return &s;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_bool_text(std::string_view v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
  return false;
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    double v = 0.0;
    if (!parse_number(item, v) || !std::isfinite(v)) {
      throw ConfigError("key '" + std::string(key) + "' expects a comma-separated list of numbers, got '" +
                        std::string(text) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_value(const KeySpec& spec, std::string_view value) {
  const auto fail = [&](const char* what) {
    throw ConfigError("key '" + std::string(spec.key) + "' expects " + what + ", got '" + std::string(value) + "'");
  };
  switch (spec.kind) {
    case Kind::kString: return;
    case Kind::kInt: {
      long long v;
      if (!parse_number(value, v)) fail("an integer");
      return;
    }
    case Kind::kUInt: {
      std::uint64_t v;
      if (!parse_number(value, v)) fail("a non-negative integer");
      return;
    }
    case Kind::kDouble: {
      double v;
      if (!parse_number(value, v) || !std::isfinite(v)) fail("a number");
      return;
    }
    case Kind::kBool: {
      bool v;
      if (!parse_bool_text(value, v)) fail("true or false");
      return;
    }
    case Kind::kList: parse_list(spec.key, value); return;
  }
}

}  // namespace

const std::map<std::string, std::string, std::less<>>& RunConfig::defaults() {
  static const auto table = [] {
    std::map<std::string, std::string, std::less<>> m;
    for (const KeySpec& s : kKeys) m.emplace(s.key, s.value);
    return m;
  }();
  return table;
}

std::string_view RunConfig::describe(std::string_view key) {
  const KeySpec* spec = find_spec(key);
  return spec ? spec->help : std::string_view{};
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  const std::string v = trim(value);
  check_value(*spec, v);
  values_[std::string(key)] = v;
}

void RunConfig::load_string(const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    set(trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    load_string(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool RunConfig::has(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  return it->second;
}

long long RunConfig::get_int(std::string_view key) const {
  long long v = 0;
  if (!parse_number(get(key), v)) throw ConfigError("key '" + std::string(key) + "' is not an integer");
  return v;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  std::uint64_t v = 0;
  if (!parse_number(get(key), v)) throw ConfigError("key '" + std::string(key) + "' is not a non-negative integer");
  return v;
}

double RunConfig::get_double(std::string_view key) const {
  double v = 0.0;
  if (!parse_number(get(key), v)) throw ConfigError("key '" + std::string(key) + "' is not a number");
  return v;
}

bool RunConfig::get_bool(std::string_view key) const {
  bool v = false;
  if (!parse_bool_text(get(key), v)) throw ConfigError("key '" + std::string(key) + "' is not a boolean");
  return v;
}

std::vector<double> RunConfig::get_doubles(std::string_view key) const { return parse_list(key, get(key)); }

std::string RunConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << to_string();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace psd
