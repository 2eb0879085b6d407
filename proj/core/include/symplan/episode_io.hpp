#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "symplan/envsim.hpp"

namespace symplan {

// Episode file: a header line {"header": {...}} followed by one
// {"t": seconds, "obs": [...], "label": id} object per frame.
std::string episode_to_jsonl(const Episode& episode);
Episode episode_from_jsonl(const std::string& text);
Episode load_episode(const std::filesystem::path& path);

struct DatasetManifest {
  TaskId task = TaskId::abcdef;
  std::uint64_t seed = 0;
  double frame_rate = 10.0;
  double obs_noise = 0.05;
  std::map<std::string, std::vector<std::string>> files;  // split -> relative paths
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, std::vector<Episode>> splits;

  const std::vector<Episode>& split(const std::string& name) const;
};

Dataset load_dataset(const std::filesystem::path& root);

}  // namespace symplan
