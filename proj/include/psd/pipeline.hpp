#pragma once

#include <string_view>
#include <vector>

#include "psd/adversarial.hpp"
#include "psd/metrics.hpp"
#include "psd/n2n.hpp"
#include "psd/networks.hpp"
#include "psd/run_config.hpp"

namespace psd {

// Typed views of the flat configuration.
NestedUNetConfig unet_config(const RunConfig& config);
DnCNNConfig dncnn_config(const RunConfig& config);
DiscriminatorConfig critic_config(const RunConfig& config);
AdversarialConfig adversarial_config(const RunConfig& config);
N2NConfig n2n_config(const RunConfig& config);

// Subcommands. Each writes its resolved configuration to
// <out>/<command>.resolved.cfg before doing any work.
void cmd_synth(const RunConfig& config);
void cmd_train_s2s(const RunConfig& config);
void cmd_gen_pairs(const RunConfig& config);
void cmd_train_n2n(const RunConfig& config);
void cmd_psdi(const RunConfig& config);
void cmd_despeckle(const RunConfig& config);
MetricReport cmd_eval(const RunConfig& config);

// Dispatch by subcommand name; throws ConfigError for an unknown name.
void run_command(std::string_view name, const RunConfig& config);
const std::vector<std::string_view>& command_names();

// Pair sets on disk: <dir>/pairs.json plus first/second/base float rasters.
void write_pairs(const std::vector<S2SPair>& pairs, const std::filesystem::path& dir,
                 std::string_view producer_role);
std::vector<S2SPair> read_pairs(const std::filesystem::path& dir);

// Loads every image under `dir` and crops patch_size patches when images are larger.
std::vector<Image> load_training_images(const std::filesystem::path& dir, int patch_size, int stride);

}  // namespace psd
