#include "symplan/episode_io.hpp"

#include <sstream>

#include "symplan/embedder.hpp"
#include "symplan/error.hpp"
#include "symplan/io.hpp"

namespace symplan {

std::string episode_to_jsonl(const Episode& episode) {
  const auto obs_dim = episode.frames.empty() ? 0 : episode.frames.front().obs.size();
  nlohmann::json header = {{"task", std::string(to_string(episode.meta.task))},
                           {"seed", episode.meta.seed},
                           {"generator_version", episode.meta.generator_version},
                           {"frame_rate", episode.meta.frame_rate},
                           {"obs_dim", obs_dim},
                           {"num_frames", episode.frames.size()},
                           {"alphabet", alphabet_for(episode.meta.task).name()},
                           {"initial_state", to_json(episode.initial)}};
  std::string out = nlohmann::json{{"header", header}}.dump();
  out.push_back('\n');
  for (const auto& f : episode.frames) {
    std::vector<double> obs(f.obs.data(), f.obs.data() + f.obs.size());
    out += nlohmann::json{{"t", f.t}, {"obs", obs}, {"label", f.label}}.dump();
    out.push_back('\n');
  }
  return out;
}

Episode episode_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Episode ep;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (!have_header) {
        const auto& h = j.at("header");
        ep.meta.task = parse_task(h.at("task").get<std::string>());
        ep.meta.seed = h.at("seed").get<std::uint64_t>();
        ep.meta.generator_version = h.at("generator_version").get<std::string>();
        ep.meta.frame_rate = h.at("frame_rate").get<double>();
        ep.initial = world_state_from_json(h.at("initial_state"));
        have_header = true;
        continue;
      }
      const auto obs = j.at("obs").get<std::vector<double>>();
      Frame f;
      f.t = j.at("t").get<double>();
      f.obs = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
      f.label = j.at("label").get<SymbolId>();
      ep.frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed episode at line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error("episode file has no header line");
  const auto& alphabet = alphabet_for(ep.meta.task);
  for (const auto& f : ep.frames)
    if (!alphabet.contains(f.label)) throw Error("episode label out of alphabet range");
  return ep;
}

Episode load_episode(const std::filesystem::path& path) { return episode_from_jsonl(io::read_file(path)); }

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [split, files] : m.files) counts[split] = files.size();
  return {{"task", std::string(to_string(m.task))},
          {"seed", m.seed},
          {"generator_version", kGeneratorVersion},
          {"frame_rate", m.frame_rate},
          {"obs_noise", m.obs_noise},
          {"obs_dim", kObservationDim},
          {"counts", counts},
          {"alphabet", to_json(alphabet_for(m.task))},
          {"files", m.files}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.task = parse_task(j.at("task").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.frame_rate = j.at("frame_rate").get<double>();
    m.obs_noise = j.value("obs_noise", 0.05);
    m.files = j.at("files").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

const std::vector<Episode>& Dataset::split(const std::string& name) const {
  static const std::vector<Episode> kEmpty;
  auto it = splits.find(name);
  return it == splits.end() ? kEmpty : it->second;
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  ds.manifest = manifest_from_json(nlohmann::json::parse(io::read_file(root / "manifest.json")));
  for (const auto& [split, files] : ds.manifest.files) {
    auto& eps = ds.splits[split];
    for (const auto& rel : files) eps.push_back(load_episode(root / rel));
  }
  return ds;
}

}  // namespace symplan
