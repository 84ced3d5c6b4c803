#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psd/autograd.hpp"
#include "psd/tensor.hpp"

namespace psd {

enum class Role { kG1, kG2, kDiscriminator, kDespeckler };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// UNet++ node grid X(i, j), i + j <= depth. Level i has base_channels * 2^i
/// channels. No deep supervision; single linear 1x1 output head.
struct NestedUNetConfig {
  int depth = 4;
  int base_channels = 32;
  int kernel = 3;
  std::string upsample = "transposed";
  bool use_batch_norm = false;
  friend bool operator==(const NestedUNetConfig&, const NestedUNetConfig&) = default;
};

/// DnCNN-style stack: conv+relu, (depth - 2) x conv+bn+relu, conv.
struct DnCNNConfig {
  int depth = 8;
  int channels = 64;
  bool residual = true;
  bool batch_norm = true;
  friend bool operator==(const DnCNNConfig&, const DnCNNConfig&) = default;
};

/// WGAN critic: conv_stages stride-2 3x3 convolutions with leaky ReLU,
/// global average pool, affine scalar head. No normalisation layers.
struct DiscriminatorConfig {
  int conv_stages = 4;
  int base_channels = 64;
  float slope = 0.2f;
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

using ModelConfig = std::variant<NestedUNetConfig, DnCNNConfig, DiscriminatorConfig>;

// Flattened key/value form, as stored in checkpoints ("depth" -> "4", ...).
std::map<std::string, std::string> config_to_map(const ModelConfig& config);
ModelConfig config_from_map(Role role, const std::map<std::string, std::string>& values);

struct Parameter {
  std::string name;
  ag::Var var;
  // Running statistics of batch norm are stored but not trained.
  bool trainable = true;
};

struct LayerInfo {
  std::string name;
  std::string kind;  // conv, conv_transpose, max_pool, relu, leaky_relu, batch_norm, concat, global_avg_pool, linear
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

class ModelHandle {
 public:
  ModelHandle(Role role, ModelConfig config, std::uint64_t init_seed = 0);

  // Copies are deep: the clone owns its own parameter storage.
  ModelHandle(const ModelHandle& other);
  ModelHandle& operator=(const ModelHandle& other);
  ModelHandle(ModelHandle&&) noexcept = default;
  ModelHandle& operator=(ModelHandle&&) noexcept = default;

  Role role() const noexcept { return role_; }
  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<LayerInfo>& layers() const noexcept { return layers_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  const Parameter& parameter(std::string_view name) const;
  Parameter& parameter(std::string_view name);

  // Number of trainable scalars.
  std::size_t parameter_count() const;

  // Image-to-image roles return (N, 1, H, W); the discriminator returns (N, 1, 1, 1).
  // training = true selects batch statistics in batch-norm layers and updates
  // their running buffers.
  ag::Var forward(const ag::Var& x, bool training);
  Tensor infer(const Tensor& batch) const;

  void zero_grad();

  // Throws ShapeError naming the axis when the batch cannot be processed.
  void check_input(const Tensor& batch) const;

  // Free-form metadata persisted with checkpoints (e.g. step and epoch counters).
  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

 private:
  void add_conv(const std::string& name, int in, int out, int kernel, int stride, bool bias);
  void add_conv_transpose(const std::string& name, int in, int out);
  void add_batch_norm(const std::string& name, int channels);
  void add_linear(const std::string& name, int in, int out);
  void add_param(std::string name, Tensor value, bool trainable);
  void initialize(std::uint64_t seed);
  void build_layers();
  const ag::Var& var(const std::string& name) const;

  ag::Var conv(const std::string& name, const ag::Var& x, int stride, int padding) const;
  ag::Var bn(const std::string& name, const ag::Var& x, bool training);
  ag::Var bn_eval(const std::string& name, const ag::Var& x) const;

  ag::Var forward_unet(const ag::Var& x, bool training);
  ag::Var forward_dncnn(const ag::Var& x, bool training);
  ag::Var forward_critic(const ag::Var& x);

  Role role_;
  ModelConfig config_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<LayerInfo> layers_;
  std::map<std::string, std::string> metadata_;
};

// Validates role/config compatibility and builds a freshly initialised model
// (Kaiming fan-in normal weights, zero biases, unit/zero batch-norm affine).
ModelHandle build_model(Role role, const ModelConfig& config, std::uint64_t seed = 0);

// Deterministic inference (no graph, batch norm in eval mode).
Tensor forward(const ModelHandle& model, const Tensor& batch);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelHandle& model, const std::filesystem::path& path);
ModelHandle load_checkpoint(const std::filesystem::path& path);
// Also verifies role and configuration, throwing ConfigMismatch on difference.
ModelHandle load_checkpoint(const std::filesystem::path& path, Role expected_role,
                            const ModelConfig& expected_config);

}  // namespace psd
