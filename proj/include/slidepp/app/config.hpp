#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slidepp::app {

// `key = value` lines; `#` starts a comment when it opens the line or follows
// whitespace. Relative paths resolve against the directory of the file that
// defined the key (the working directory for command-line overrides).
//
// Every typed read records the effective value (defaults included, paths made
// absolute), which is what the run manifest persists.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::filesystem::path& base_dir,
                      const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  // Command-line override; replaces any file value.
  void set(const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = std::filesystem::current_path());

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  // Keys that start with `prefix`, in sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated; blanks dropped.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
  std::filesystem::path get_path(const std::string& key) const;
  std::vector<std::filesystem::path> get_path_list(const std::string& key) const;

  // Marks a key as consumed without recording it.
  void consume(const std::string& key) const;
  std::vector<std::string> unused() const;

  const std::map<std::string, std::string>& resolved() const { return resolved_; }

 private:
  struct Entry {
    std::string value;
    std::filesystem::path base_dir;
    std::string origin;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void bad(const std::string& key, const std::string& what) const;
  void record(const std::string& key, const std::string& value) const;

  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, bool> used_;
  mutable std::map<std::string, std::string> resolved_;
};

std::string format_number(double v);
std::string join(const std::vector<std::string>& items, const std::string& sep = ", ");

// Re-runnable record of a command: the resolved configuration plus command,
// seed and versions. Artifacts are listed as comments so a manifest can be
// passed back as --config.
struct Manifest {
  std::string command;
  std::uint64_t seed = 1;
  int threads = 1;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::string failed_stage;

  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace slidepp::app
