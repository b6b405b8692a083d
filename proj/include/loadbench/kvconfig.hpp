#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loadbench {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Later assignments override earlier ones, so command-line overrides are
/// applied with set() after load().
class KvConfig {
 public:
  static KvConfig load(const std::string& path);
  static KvConfig parse(const std::string& text);

  void merge_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Canonical `key=value\n` lines in key order.
  std::string canonical() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace loadbench
