#include "psd/train_log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "psd/error.hpp"

namespace psd {

void TrainLog::append(TrainRecord record) {
  if (!records_.empty() && record.step <= records_.back().step) {
    throw InvalidArgument("step " + std::to_string(record.step) + " does not follow step " +
                          std::to_string(records_.back().step));
  }
  for (const auto& [key, value] : record.values) {
    if (!std::isfinite(value)) throw InvalidArgument("non-finite value for '" + key + "' at step " + std::to_string(record.step));
  }
  records_.push_back(std::move(record));
}

std::size_t TrainLog::count(const std::string& kind) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const TrainRecord& r) { return r.kind == kind; }));
}

void TrainLog::write_jsonl(const std::filesystem::path& path, bool append) const {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const TrainRecord& r : records_) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["kind"] = r.kind;
    j["epoch"] = r.epoch;
    j["wall_time"] = r.wall_time;
    for (const auto& [k, v] : r.values) j[k] = v;
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

TrainLog TrainLog::read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  TrainLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TrainRecord r;
      r.step = j.at("step").get<std::int64_t>();
      r.kind = j.at("kind").get<std::string>();
      r.epoch = j.at("epoch").get<int>();
      r.wall_time = j.value("wall_time", 0.0);
      for (const auto& [k, v] : j.items()) {
        if (k == "step" || k == "kind" || k == "epoch" || k == "wall_time") continue;
        r.values[k] = v.get<double>();
      }
      log.append(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw CorruptFile(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace psd
