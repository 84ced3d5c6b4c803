#include "psd/networks.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "psd/error.hpp"
#include "psd/random.hpp"

namespace psd {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int parse_int(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw CorruptFile("checkpoint config lacks key '" + key + "'");
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw CorruptFile("checkpoint config key '" + key + "' is not an integer: " + it->second);
  }
}

bool parse_bool(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw CorruptFile("checkpoint config lacks key '" + key + "'");
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw CorruptFile("checkpoint config key '" + key + "' is not a boolean: " + it->second);
}

void validate(Role role, const ModelConfig& config) {
  const bool ok = std::visit(
      Overloaded{
          [&](const NestedUNetConfig&) { return role == Role::kG1 || role == Role::kDespeckler; },
          [&](const DnCNNConfig&) { return role == Role::kG2; },
          [&](const DiscriminatorConfig&) { return role == Role::kDiscriminator; },
      },
      config);
  if (!ok) throw InvalidArgument("configuration type does not match role '" + std::string(role_name(role)) + "'");

  std::visit(Overloaded{
                 [](const NestedUNetConfig& c) {
                   if (c.depth < 1) throw InvalidArgument("nested unet depth must be >= 1");
                   if (c.base_channels < 1) throw InvalidArgument("nested unet base_channels must be >= 1");
                   if (c.kernel < 1 || c.kernel % 2 == 0) throw InvalidArgument("nested unet kernel must be odd");
                   if (c.upsample != "transposed") {
                     throw InvalidArgument("unsupported upsample method '" + c.upsample + "'");
                   }
                 },
                 [](const DnCNNConfig& c) {
                   if (c.depth < 3) throw InvalidArgument("dncnn depth must be >= 3");
                   if (c.channels < 1) throw InvalidArgument("dncnn channels must be >= 1");
                 },
                 [](const DiscriminatorConfig& c) {
                   if (c.conv_stages < 1) throw InvalidArgument("discriminator conv_stages must be >= 1");
                   if (c.base_channels < 1) throw InvalidArgument("discriminator base_channels must be >= 1");
                   if (!(c.slope >= 0.0f)) throw InvalidArgument("leaky slope must be >= 0");
                 },
             },
             config);
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kG1: return "g1";
    case Role::kG2: return "g2";
    case Role::kDiscriminator: return "discriminator";
    case Role::kDespeckler: return "despeckler";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  if (name == "g1") return Role::kG1;
  if (name == "g2") return Role::kG2;
  if (name == "discriminator") return Role::kDiscriminator;
  if (name == "despeckler") return Role::kDespeckler;
  throw InvalidArgument("unknown model role '" + std::string(name) + "'");
}

std::map<std::string, std::string> config_to_map(const ModelConfig& config) {
  return std::visit(Overloaded{
                        [](const NestedUNetConfig& c) -> std::map<std::string, std::string> {
                          return {{"arch", "nested_unet"},
                                  {"depth", std::to_string(c.depth)},
                                  {"base_channels", std::to_string(c.base_channels)},
                                  {"kernel", std::to_string(c.kernel)},
                                  {"upsample", c.upsample},
                                  {"use_batch_norm", c.use_batch_norm ? "true" : "false"}};
                        },
                        [](const DnCNNConfig& c) -> std::map<std::string, std::string> {
                          return {{"arch", "dncnn"},
                                  {"depth", std::to_string(c.depth)},
                                  {"channels", std::to_string(c.channels)},
                                  {"residual", c.residual ? "true" : "false"},
                                  {"batch_norm", c.batch_norm ? "true" : "false"}};
                        },
                        [](const DiscriminatorConfig& c) -> std::map<std::string, std::string> {
                          return {{"arch", "wgan_critic"},
                                  {"conv_stages", std::to_string(c.conv_stages)},
                                  {"base_channels", std::to_string(c.base_channels)},
                                  {"slope", format_float(c.slope)}};
                        },
                    },
                    config);
}

ModelConfig config_from_map(Role role, const std::map<std::string, std::string>& m) {
  switch (role) {
    case Role::kG1:
    case Role::kDespeckler: {
      NestedUNetConfig c;
      c.depth = parse_int(m, "depth");
      c.base_channels = parse_int(m, "base_channels");
      c.kernel = parse_int(m, "kernel");
      auto it = m.find("upsample");
      if (it == m.end()) throw CorruptFile("checkpoint config lacks key 'upsample'");
      c.upsample = it->second;
      c.use_batch_norm = parse_bool(m, "use_batch_norm");
      return c;
    }
    case Role::kG2: {
      DnCNNConfig c;
      c.depth = parse_int(m, "depth");
      c.channels = parse_int(m, "channels");
      c.residual = parse_bool(m, "residual");
      c.batch_norm = parse_bool(m, "batch_norm");
      return c;
    }
    case Role::kDiscriminator: {
      DiscriminatorConfig c;
      c.conv_stages = parse_int(m, "conv_stages");
      c.base_channels = parse_int(m, "base_channels");
      auto it = m.find("slope");
      if (it == m.end()) throw CorruptFile("checkpoint config lacks key 'slope'");
      c.slope = std::stof(it->second);
      return c;
    }
  }
  throw InvalidArgument("unknown role");
}

// --- ModelHandle -------------------------------------------------------------

ModelHandle::ModelHandle(Role role, ModelConfig config, std::uint64_t init_seed)
    : role_(role), config_(std::move(config)) {
  validate(role_, config_);
  build_layers();
  initialize(init_seed);
}

ModelHandle::ModelHandle(const ModelHandle& other)
    : role_(other.role_), config_(other.config_), index_(other.index_), layers_(other.layers_),
      metadata_(other.metadata_) {
  params_.reserve(other.params_.size());
  for (const Parameter& p : other.params_) {
    params_.push_back({p.name, ag::leaf(p.var->value, p.trainable), p.trainable});
  }
}

ModelHandle& ModelHandle::operator=(const ModelHandle& other) {
  if (this != &other) {
    ModelHandle copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void ModelHandle::add_param(std::string name, Tensor value, bool trainable) {
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), ag::leaf(std::move(value), trainable), trainable});
}

void ModelHandle::add_conv(const std::string& name, int in, int out, int kernel, int stride, bool bias) {
  add_param(name + ".weight", Tensor(out, in, kernel, kernel), true);
  if (bias) add_param(name + ".bias", Tensor(out, 1, 1, 1), true);
  layers_.push_back({name, "conv", in, out, kernel, stride});
}

void ModelHandle::add_conv_transpose(const std::string& name, int in, int out) {
  add_param(name + ".weight", Tensor(in, out, 2, 2), true);
  add_param(name + ".bias", Tensor(out, 1, 1, 1), true);
  layers_.push_back({name, "conv_transpose", in, out, 2, 2});
}

void ModelHandle::add_batch_norm(const std::string& name, int channels) {
  add_param(name + ".gamma", Tensor(channels, 1, 1, 1, 1.0f), true);
  add_param(name + ".beta", Tensor(channels, 1, 1, 1), true);
  add_param(name + ".running_mean", Tensor(channels, 1, 1, 1), false);
  add_param(name + ".running_var", Tensor(channels, 1, 1, 1, 1.0f), false);
  layers_.push_back({name, "batch_norm", channels, channels, 0, 1});
}

void ModelHandle::add_linear(const std::string& name, int in, int out) {
  add_param(name + ".weight", Tensor(out, in, 1, 1), true);
  add_param(name + ".bias", Tensor(out, 1, 1, 1), true);
  layers_.push_back({name, "linear", in, out, 1, 1});
}

void ModelHandle::build_layers() {
  std::visit(
      Overloaded{
          [this](const NestedUNetConfig& c) {
            auto channels = [&](int level) { return c.base_channels << level; };
            auto block = [&](const std::string& node, int in, int out) {
              add_conv(node + ".conv1", in, out, c.kernel, 1, true);
              if (c.use_batch_norm) add_batch_norm(node + ".bn1", out);
              layers_.push_back({node + ".relu1", "relu", out, out, 0, 1});
              add_conv(node + ".conv2", out, out, c.kernel, 1, true);
              if (c.use_batch_norm) add_batch_norm(node + ".bn2", out);
              layers_.push_back({node + ".relu2", "relu", out, out, 0, 1});
            };
            for (int i = 0; i <= c.depth; ++i) {
              const std::string node = "x" + std::to_string(i) + "_0";
              if (i > 0) layers_.push_back({node + ".pool", "max_pool", channels(i - 1), channels(i - 1), 2, 2});
              block(node, i == 0 ? 1 : channels(i - 1), channels(i));
            }
            for (int j = 1; j <= c.depth; ++j) {
              for (int i = 0; i + j <= c.depth; ++i) {
                const std::string node = "x" + std::to_string(i) + "_" + std::to_string(j);
                add_conv_transpose("up" + std::to_string(i) + "_" + std::to_string(j), channels(i + 1), channels(i));
                layers_.push_back({node + ".concat", "concat", (j + 1) * channels(i), (j + 1) * channels(i), 0, 1});
                block(node, (j + 1) * channels(i), channels(i));
              }
            }
            add_conv("head", channels(0), 1, 1, 1, true);
          },
          [this](const DnCNNConfig& c) {
            add_conv("conv0", 1, c.channels, 3, 1, true);
            layers_.push_back({"relu0", "relu", c.channels, c.channels, 0, 1});
            for (int l = 1; l + 1 < c.depth; ++l) {
              add_conv("conv" + std::to_string(l), c.channels, c.channels, 3, 1, !c.batch_norm);
              if (c.batch_norm) add_batch_norm("bn" + std::to_string(l), c.channels);
              layers_.push_back({"relu" + std::to_string(l), "relu", c.channels, c.channels, 0, 1});
            }
            add_conv("conv" + std::to_string(c.depth - 1), c.channels, 1, 3, 1, true);
          },
          [this](const DiscriminatorConfig& c) {
            int in = 1;
            for (int s = 0; s < c.conv_stages; ++s) {
              const int out = c.base_channels << s;
              add_conv("conv" + std::to_string(s), in, out, 3, 2, true);
              layers_.push_back({"lrelu" + std::to_string(s), "leaky_relu", out, out, 0, 1});
              in = out;
            }
            layers_.push_back({"pool", "global_avg_pool", in, in, 0, 1});
            add_linear("head", in, 1);
          },
      },
      config_);
}

void ModelHandle::initialize(std::uint64_t seed) {
  Philox rng(seed, 0x1a17);
  for (Parameter& p : params_) {
    const bool is_weight = p.name.size() > 7 && p.name.compare(p.name.size() - 7, 7, ".weight") == 0;
    if (!is_weight) continue;
    Tensor& w = p.var->value;
    // Transposed 2x2/stride-2 convolutions feed each output from cin inputs through one tap.
    const bool transposed = p.name.rfind("up", 0) == 0;
    const int fan_in = transposed ? w.n() : w.c() * w.h() * w.w();
    const double stddev = std::sqrt(2.0 / fan_in);
    for (float& v : w.span()) v = static_cast<float>(rng.normal() * stddev);
  }
}

const ag::Var& ModelHandle::var(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("model has no parameter '" + name + "'");
  return params_[it->second].var;
}

const Parameter& ModelHandle::parameter(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("model has no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

Parameter& ModelHandle::parameter(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("model has no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

std::size_t ModelHandle::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) {
    if (p.trainable) n += p.var->value.size();
  }
  return n;
}

void ModelHandle::zero_grad() {
  for (Parameter& p : params_) p.var->grad = Tensor();
}

void ModelHandle::check_input(const Tensor& batch) const {
  if (batch.n() < 1) throw ShapeError("batch axis is empty");
  if (batch.c() != 1) throw ShapeError("channel axis must be 1, got " + std::to_string(batch.c()));
  if (batch.h() < 1 || batch.w() < 1) throw ShapeError("spatial axes must be non-empty");
  if (const auto* c = std::get_if<NestedUNetConfig>(&config_)) {
    const int m = 1 << c->depth;
    if (batch.h() % m != 0) {
      throw ShapeError("height " + std::to_string(batch.h()) + " is not divisible by " + std::to_string(m) +
                       " (2^depth)");
    }
    if (batch.w() % m != 0) {
      throw ShapeError("width " + std::to_string(batch.w()) + " is not divisible by " + std::to_string(m) +
                       " (2^depth)");
    }
  }
}

ag::Var ModelHandle::conv(const std::string& name, const ag::Var& x, int stride, int padding) const {
  auto bias = index_.find(name + ".bias");
  return ag::conv2d(x, var(name + ".weight"), bias == index_.end() ? nullptr : params_[bias->second].var, stride,
                    padding);
}

ag::Var ModelHandle::bn(const std::string& name, const ag::Var& x, bool training) {
  if (!training) return bn_eval(name, x);
  return ag::batch_norm_train(x, var(name + ".gamma"), var(name + ".beta"), var(name + ".running_mean")->value,
                              var(name + ".running_var")->value);
}

ag::Var ModelHandle::bn_eval(const std::string& name, const ag::Var& x) const {
  return ag::batch_norm_eval(x, var(name + ".gamma"), var(name + ".beta"), var(name + ".running_mean")->value,
                             var(name + ".running_var")->value);
}

ag::Var ModelHandle::forward_unet(const ag::Var& x, bool training) {
  const auto& c = std::get<NestedUNetConfig>(config_);
  const int pad = c.kernel / 2;
  auto block = [&](const std::string& node, ag::Var h) {
    h = conv(node + ".conv1", h, 1, pad);
    if (c.use_batch_norm) h = bn(node + ".bn1", h, training);
    h = ag::relu(h);
    h = conv(node + ".conv2", h, 1, pad);
    if (c.use_batch_norm) h = bn(node + ".bn2", h, training);
    return ag::relu(h);
  };
  // grid[i][j] = X(i, j)
  std::vector<std::vector<ag::Var>> grid(c.depth + 1);
  for (int i = 0; i <= c.depth; ++i) {
    const std::string node = "x" + std::to_string(i) + "_0";
    grid[i].push_back(block(node, i == 0 ? x : ag::max_pool2x2(grid[i - 1][0])));
  }
  for (int j = 1; j <= c.depth; ++j) {
    for (int i = 0; i + j <= c.depth; ++i) {
      const std::string tag = std::to_string(i) + "_" + std::to_string(j);
      std::vector<ag::Var> parts(grid[i].begin(), grid[i].begin() + j);
      parts.push_back(ag::conv_transpose2x2(grid[i + 1][j - 1], var("up" + tag + ".weight"), var("up" + tag + ".bias")));
      grid[i].push_back(block("x" + tag, ag::concat_channels(parts)));
    }
  }
  return conv("head", grid[0][c.depth], 1, 0);
}

ag::Var ModelHandle::forward_dncnn(const ag::Var& x, bool training) {
  const auto& c = std::get<DnCNNConfig>(config_);
  ag::Var h = ag::relu(conv("conv0", x, 1, 1));
  for (int l = 1; l + 1 < c.depth; ++l) {
    h = conv("conv" + std::to_string(l), h, 1, 1);
    if (c.batch_norm) h = bn("bn" + std::to_string(l), h, training);
    h = ag::relu(h);
  }
  h = conv("conv" + std::to_string(c.depth - 1), h, 1, 1);
  return c.residual ? ag::add(x, h) : h;
}

ag::Var ModelHandle::forward_critic(const ag::Var& x) {
  const auto& c = std::get<DiscriminatorConfig>(config_);
  ag::Var h = x;
  for (int s = 0; s < c.conv_stages; ++s) h = ag::leaky_relu(conv("conv" + std::to_string(s), h, 2, 1), c.slope);
  h = ag::global_avg_pool(h);
  return ag::linear(h, var("head.weight"), var("head.bias"));
}

ag::Var ModelHandle::forward(const ag::Var& x, bool training) {
  check_input(x->value);
  switch (role_) {
    case Role::kG1:
    case Role::kDespeckler: return forward_unet(x, training);
    case Role::kG2: return forward_dncnn(x, training);
    case Role::kDiscriminator: return forward_critic(x);
  }
  throw InvalidArgument("unknown role");
}

Tensor ModelHandle::infer(const Tensor& batch) const {
  ag::NoGradGuard guard;
  // Eval mode reads parameters only; the const_cast never reaches a mutating path.
  return const_cast<ModelHandle*>(this)->forward(ag::constant(batch), false)->value;
}

ModelHandle build_model(Role role, const ModelConfig& config, std::uint64_t seed) {
  return ModelHandle(role, config, seed);
}

Tensor forward(const ModelHandle& model, const Tensor& batch) { return model.infer(batch); }

// --- checkpoints ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CorruptFile("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const ModelHandle& model, const std::filesystem::path& path) {
  std::ostringstream manifest;
  manifest << "role=" << role_name(model.role()) << "\n";
  for (const auto& [k, v] : config_to_map(model.config())) manifest << "config." << k << "=" << v << "\n";
  for (const auto& [k, v] : model.metadata()) manifest << "meta." << k << "=" << v << "\n";
  std::uint64_t payload_bytes = 0;
  for (const Parameter& p : model.parameters()) {
    const auto& s = p.var->value.shape();
    manifest << "param " << p.name << " " << (p.trainable ? 1 : 0) << " " << s[0] << " " << s[1] << " " << s[2] << " "
             << s[3] << "\n";
    payload_bytes += p.var->value.size() * sizeof(float);
  }
  const std::string text = manifest.str();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  Fnv fnv;
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  fnv.add(text.data(), text.size());
  put<std::uint64_t>(os, payload_bytes);
  for (const Parameter& p : model.parameters()) {
    const Tensor& t = p.var->value;
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    fnv.add(t.data(), t.size() * sizeof(float));
  }
  put<std::uint64_t>(os, fnv.h);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

ModelHandle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CorruptFile("'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw CorruptFile("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto manifest_bytes = get<std::uint64_t>(is, "manifest size");
  if (manifest_bytes > (std::uint64_t{1} << 26)) throw CorruptFile("implausible manifest size");
  std::string text(manifest_bytes, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(manifest_bytes))) throw CorruptFile("checkpoint truncated in manifest");
  Fnv fnv;
  fnv.add(text.data(), text.size());

  std::optional<Role> role;
  std::map<std::string, std::string> config_map, meta;
  struct Entry {
    std::string name;
    bool trainable;
    std::array<int, 4> shape;
  };
  std::vector<Entry> entries;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (line.rfind("param ", 0) == 0) {
      std::istringstream ls(line.substr(6));
      Entry e;
      int trainable = 0;
      if (!(ls >> e.name >> trainable >> e.shape[0] >> e.shape[1] >> e.shape[2] >> e.shape[3])) {
        throw CorruptFile("malformed parameter line: " + line);
      }
      e.trainable = trainable != 0;
      entries.push_back(std::move(e));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptFile("malformed manifest line: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "role") {
      try {
        role = parse_role(value);
      } catch (const InvalidArgument&) {
        throw CorruptFile("unknown role '" + value + "' in checkpoint");
      }
    } else if (key.rfind("config.", 0) == 0) {
      config_map[key.substr(7)] = value;
    } else if (key.rfind("meta.", 0) == 0) {
      meta[key.substr(5)] = value;
    } else {
      throw CorruptFile("unknown manifest key '" + key + "'");
    }
  }
  if (!role) throw CorruptFile("checkpoint manifest has no role");

  ModelConfig config = config_from_map(*role, config_map);
  std::optional<ModelHandle> model;
  try {
    model.emplace(*role, config, 0);
  } catch (const InvalidArgument& e) {
    throw CorruptFile(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
  auto& params = model->parameters();
  if (entries.size() != params.size()) {
    throw CorruptFile("checkpoint lists " + std::to_string(entries.size()) + " parameters, architecture has " +
                      std::to_string(params.size()));
  }
  const auto payload_bytes = get<std::uint64_t>(is, "payload size");
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Tensor& t = params[i].var->value;
    if (entries[i].name != params[i].name || entries[i].shape != t.shape() ||
        entries[i].trainable != params[i].trainable) {
      throw CorruptFile("parameter '" + entries[i].name + "' does not match the architecture");
    }
    expected += t.size() * sizeof(float);
  }
  if (payload_bytes != expected) throw CorruptFile("payload size does not match the parameter table");
  for (Parameter& p : params) {
    Tensor& t = p.var->value;
    if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)))) {
      throw CorruptFile("checkpoint truncated in parameter '" + p.name + "'");
    }
    fnv.add(t.data(), t.size() * sizeof(float));
  }
  const auto checksum = get<std::uint64_t>(is, "checksum");
  if (checksum != fnv.h) throw CorruptFile("checkpoint checksum mismatch");
  model->metadata() = std::move(meta);
  return std::move(*model);
}

ModelHandle load_checkpoint(const std::filesystem::path& path, Role expected_role, const ModelConfig& expected_config) {
  ModelHandle model = load_checkpoint(path);
  if (model.role() != expected_role) {
    throw ConfigMismatch("checkpoint role is '" + std::string(role_name(model.role())) + "', expected '" +
                         std::string(role_name(expected_role)) + "'");
  }
  if (!(model.config() == expected_config)) {
    std::string found, wanted;
    for (const auto& [k, v] : config_to_map(model.config())) found += k + "=" + v + " ";
    for (const auto& [k, v] : config_to_map(expected_config)) wanted += k + "=" + v + " ";
    throw ConfigMismatch("checkpoint configuration [" + found + "] differs from expected [" + wanted + "]");
  }
  return model;
}

}  // namespace psd
