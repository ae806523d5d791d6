#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "compsense/common.hpp"
#include "compsense/config.hpp"

namespace compsense {

// Provenance record written beside an output as "<output>.manifest.json".
struct RunManifest {
  std::vector<std::string> command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::pair<std::string, std::uint64_t>> inputs;  // role -> (path, hash)
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::pair<std::string, std::uint64_t>> outputs;

  void add_input(const std::string& role, const std::filesystem::path& path) {
    inputs[role] = {path.string(), hash_file(path)};
  }
  void add_inputs(const std::string& role, const std::vector<std::filesystem::path>& paths) {
    for (std::size_t i = 0; i < paths.size(); ++i) add_input(role + "[" + std::to_string(i) + "]", paths[i]);
  }
  void add_output(const std::string& role, const std::filesystem::path& path) {
    outputs[role] = {path.string(), hash_file(path)};
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "compsense";
    j["version"] = std::string(kToolVersion);
    j["command"] = command;
    j["config"] = config;
    auto files = [](const auto& m) {
      nlohmann::json o = nlohmann::json::object();
      for (const auto& [role, ph] : m) o[role] = {{"path", ph.first}, {"fnv1a64", hex64(ph.second)}};
      return o;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [k, v] : seeds) s[k] = v;
    j["seeds"] = s;
    return j;
  }

  static std::filesystem::path path_for(const std::filesystem::path& output) {
    return output.string() + ".manifest.json";
  }

  void write_beside(const std::filesystem::path& output) const {
    write_file_atomic(path_for(output), to_json().dump(2) + "\n");
  }
};

// Hash recorded for an input role in the manifest beside `output`, if any.
inline std::optional<std::uint64_t> manifest_input_hash(const std::filesystem::path& output, const std::string& role) {
  const auto mpath = RunManifest::path_for(output);
  if (!std::filesystem::exists(mpath)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_file(mpath));
    const auto& in = j.at("inputs");
    if (!in.contains(role)) return std::nullopt;
    return parse_hex64(in.at(role).at("fnv1a64").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace compsense
