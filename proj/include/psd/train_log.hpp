#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace psd {

/// One optimisation step. `values` carries the loss breakdown and learning
/// rates; keys in use:
///   critic steps:    critic_loss, critic_lr, critic_max_abs
///   generator steps: wgan, cycle, tv, tv_per_pixel, objective, gen_lr, clamp_rate
///   n2n steps:       mse, lr
///   n2n epochs:      epoch_mse
struct TrainRecord {
  std::int64_t step = 0;
  std::string kind;  // "critic", "generator", "n2n", "n2n_epoch"
  int epoch = 0;
  std::map<std::string, double> values;
  double wall_time = 0.0;  // seconds since the trainer started
};

class TrainLog {
 public:
  // Throws InvalidArgument if the step index does not increase or a value is not finite.
  void append(TrainRecord record);
  const std::vector<TrainRecord>& records() const noexcept { return records_; }
  std::int64_t last_step() const noexcept { return records_.empty() ? -1 : records_.back().step; }
  std::size_t count(const std::string& kind) const;

  // One JSON object per line: {"step":..,"kind":..,"epoch":..,"wall_time":..,<values>}.
  void write_jsonl(const std::filesystem::path& path, bool append = false) const;
  static TrainLog read_jsonl(const std::filesystem::path& path);

 private:
  std::vector<TrainRecord> records_;
};

}  // namespace psd
