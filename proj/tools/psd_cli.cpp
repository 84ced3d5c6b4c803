// Command-line front end. Talks to the library only through the C interface.
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "psd/psd.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Short flags per subcommand, mapped onto configuration keys.
const std::map<std::string, std::vector<std::pair<std::string, std::string>>> kAliases = {
    {"synth", {{"recipe", "synth.recipe"}, {"count", "synth.count"}, {"size", "synth.size"}, {"looks", "synth.looks"},
               {"depth", "synth.depth"}}},
    {"train-s2s", {{"data", "data"}, {"epochs", "adv.epochs"}, {"stop-epoch", "adv.stop_epoch"},
                   {"batch-size", "adv.batch_size"}, {"depth", "net.depth"}, {"base-channels", "net.base_channels"},
                   {"patch-size", "patch.size"}, {"patch-stride", "patch.stride"}, {"resume", "adv.resume"},
                   {"alpha", "adv.alpha"}}},
    {"gen-pairs", {{"data", "data"}, {"model", "model"}, {"looks", "pairs.looks"}, {"patch-size", "patch.size"},
                   {"patch-stride", "patch.stride"}}},
    {"train-n2n", {{"pairs", "pairs"}, {"epochs", "n2n.epochs"}, {"batch-size", "n2n.batch_size"}, {"lr", "n2n.lr"},
                   {"depth", "net.depth"}, {"base-channels", "net.base_channels"}, {"pair-mode", "n2n.pair_mode"}}},
    {"psdi", {{"data", "data"}, {"model", "model"}, {"rounds", "psdi.rounds"}, {"epochs", "n2n.epochs"},
              {"batch-size", "n2n.batch_size"}, {"lr", "n2n.lr"}, {"depth", "net.depth"},
              {"base-channels", "net.base_channels"}, {"patch-size", "patch.size"}, {"patch-stride", "patch.stride"}}},
    {"despeckle", {{"model", "model"}, {"input", "input"}, {"export-depth", "export.depth"}}},
    {"eval", {{"clean", "eval.clean"}, {"original", "eval.original"}, {"despeckled", "eval.despeckled"},
              {"regions", "eval.regions"}, {"peak", "eval.peak"}}},
};

struct Settings {
  std::string config_file;
  std::vector<std::string> assignments;  // key=value from --set
  std::vector<std::pair<std::string, std::string>> flags;
};

int apply(psd_config* config, const std::string& key, const std::string& value) {
  if (psd_config_set(config, key.c_str(), value.c_str()) != PSD_OK) {
    std::fprintf(stderr, "error: %s\n", psd_last_error());
    return kExitUsage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised SAR despeckling pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", psd_version());

  std::map<std::string, Settings> settings;
  std::map<std::string, std::map<std::string, std::string>> values;  // command -> key -> raw flag value

  const int key_count = psd_config_key_count();
  for (int c = 0; c < psd_command_count(); ++c) {
    const std::string name = psd_command_name(c);
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    Settings& s = settings[name];
    sub->add_option("-c,--config", s.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", s.assignments, "override one setting, key=value (repeatable)");
    auto& v = values[name];
    sub->add_option("--out", v["out"], "output directory");
    sub->add_option("--seed", v["seed"], "master seed");
    if (auto it = kAliases.find(name); it != kAliases.end()) {
      for (const auto& [flag, key] : it->second) sub->add_option("--" + flag, v[key], "sets " + key);
    }
    for (int k = 0; k < key_count; ++k) {
      const std::string key = psd_config_key_name(k);
      if (key.find('.') == std::string::npos) continue;
      sub->add_option("--" + key, v[key], psd_config_key_help(k))->group("Settings");
    }
  }
  CLI::App* keys = app.add_subcommand("keys", "list every configuration key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  psd_config* config = nullptr;
  if (psd_config_create(&config) != PSD_OK) {
    std::fprintf(stderr, "error: %s\n", psd_last_error());
    return kExitRuntime;
  }
  struct Free {
    psd_config* c;
    ~Free() { psd_config_free(c); }
  } guard{config};

  if (keys->parsed()) {
    for (int k = 0; k < key_count; ++k) {
      const char* key = psd_config_key_name(k);
      std::printf("%-24s = %-14s # %s\n", key, psd_config_get(config, key), psd_config_key_help(k));
    }
    return 0;
  }

  for (int c = 0; c < psd_command_count(); ++c) {
    const std::string name = psd_command_name(c);
    if (!app.got_subcommand(name)) continue;
    const Settings& s = settings[name];
    // Precedence: command-line flag > config file > built-in default.
    if (!s.config_file.empty() && psd_config_load_file(config, s.config_file.c_str()) != PSD_OK) {
      std::fprintf(stderr, "error: %s\n", psd_last_error());
      return kExitUsage;
    }
    for (const std::string& a : s.assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", a.c_str());
        return kExitUsage;
      }
      if (int rc = apply(config, a.substr(0, eq), a.substr(eq + 1))) return rc;
    }
    CLI::App* sub = app.get_subcommand(name);
    for (const auto& [key, value] : values[name]) {
      if (sub->count("--" + key) == 0 && value.empty()) continue;
      if (int rc = apply(config, key, value)) return rc;
    }
    const psd_status status = psd_run(name.c_str(), config);
    if (status != PSD_OK) {
      std::fprintf(stderr, "error: %s\n", psd_last_error());
      return status == PSD_ERR_CONFIG || status == PSD_ERR_CONFIG_MISMATCH ? kExitUsage : kExitRuntime;
    }
    return 0;
  }
  return kExitUsage;
}
