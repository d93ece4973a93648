#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace loadcast {

inline constexpr const char* kToolVersion = "0.1.0";

struct StageRecord {
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> arguments;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
};

// One entry per executed subcommand; rerunning a subcommand replaces its
// entry. No timestamps, so identical runs give identical manifests.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::vector<StageRecord> stages;

  void record(StageRecord stage);
  const StageRecord* find(const std::string& name) const;

  static RunManifest load(const std::filesystem::path& path);  // empty if absent
  void save(const std::filesystem::path& path) const;
};

// Digest map for existing files; directories contribute each regular file.
std::map<std::string, std::string> digest_paths(const std::vector<std::filesystem::path>& paths);

}  // namespace loadcast
