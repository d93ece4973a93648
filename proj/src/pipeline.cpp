#include "loadcast/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "loadcast/digest.hpp"
#include "loadcast/error.hpp"

namespace loadcast {

void RunManifest::record(StageRecord stage) {
  auto it = std::find_if(stages.begin(), stages.end(), [&](const auto& s) { return s.name == stage.name; });
  if (it != stages.end()) *it = std::move(stage);
  else stages.push_back(std::move(stage));
}

const StageRecord* RunManifest::find(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  RunManifest m;
  if (!std::filesystem::exists(path)) return m;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
    m.tool_version = j.at("tool_version").get<std::string>();
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.config_hash = s.at("config_hash").get<std::string>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.arguments = s.at("arguments").get<std::vector<std::string>>();
      r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      m.stages.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, "malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"name", s.name},
                           {"config_hash", s.config_hash},
                           {"seed", s.seed},
                           {"arguments", s.arguments},
                           {"inputs", s.inputs},
                           {"outputs", s.outputs}});
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

std::map<std::string, std::string> digest_paths(const std::vector<std::filesystem::path>& paths) {
  std::map<std::string, std::string> out;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      for (const auto& e : std::filesystem::recursive_directory_iterator(p))
        if (e.is_regular_file()) out[e.path().generic_string()] = sha256_file(e.path());
    } else if (std::filesystem::exists(p)) {
      out[p.generic_string()] = sha256_file(p);
    }
  }
  return out;
}

}  // namespace loadcast
