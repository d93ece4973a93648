#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace loadcast {

// Flat `key = value` file in the TOML subset used by the toolkit: comments
// start with '#', string values may be double-quoted, `[section]` headers
// prefix subsequent keys as `section.key`.
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Canonical rendering (sorted keys), used for config hashing.
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace loadcast
