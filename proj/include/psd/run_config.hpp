#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace psd {

/// Flat key=value run configuration. Every key has a built-in default; unknown
/// keys are rejected. Precedence is caller-driven: load the file first, then
/// apply command-line overrides with set().
class RunConfig {
 public:
  RunConfig();

  void set(std::string_view key, std::string_view value);
  // Lines of `key = value`; blank lines and '#' comments are ignored.
  void load_file(const std::filesystem::path& path);
  void load_string(const std::string& text);

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  std::string get_string(std::string_view key) const { return get(key); }
  long long get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<double> get_doubles(std::string_view key) const;

  // Every key, sorted, one `key = value` per line.
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;

  static const std::map<std::string, std::string, std::less<>>& defaults();
  static std::string_view describe(std::string_view key);

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace psd
