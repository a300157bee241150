#include "medrl/data/episode_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace medrl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, int line, const std::string& field, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": field '" + field + "': " + what);
}

Episode parse_episode(const json& j, int feature_dim, const std::string& path, int line) {
  Episode ep;
  if (!j.contains("id") || !j["id"].is_string()) fail(path, line, "id", "missing or not a string");
  ep.id = j["id"].get<std::string>();
  if (!j.contains("schema") || !j["schema"].is_string()) fail(path, line, "schema", "missing or not a string");
  ep.schema = j["schema"].get<std::string>();
  if (ep.schema != "sepsis" && ep.schema != "vent") fail(path, line, "schema", "must be 'sepsis' or 'vent'");
  if (!j.contains("outcome") || !j["outcome"].is_string()) fail(path, line, "outcome", "missing or not a string");
  try {
    ep.outcome = outcome_from_string(j["outcome"].get<std::string>());
  } catch (const std::exception& e) {
    fail(path, line, "outcome", e.what());
  }
  if (!j.contains("steps") || !j["steps"].is_array() || j["steps"].empty())
    fail(path, line, "steps", "missing or empty");
  const int a_max = action_cardinality(ep.schema);
  const auto& steps = j["steps"];
  ep.steps.reserve(steps.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto& js = steps[s];
    EpisodeStep step;
    if (!js.contains("t") || !js["t"].is_number()) fail(path, line, "steps[" + std::to_string(s) + "].t", "missing");
    step.time = js["t"].get<double>();
    if (!js.contains("obs") || !js["obs"].is_array() || static_cast<int>(js["obs"].size()) != feature_dim)
      fail(path, line, "steps[" + std::to_string(s) + "].obs", "missing or wrong length (expected " +
                                                                  std::to_string(feature_dim) + ")");
    step.obs.resize(feature_dim);
    step.mask.resize(feature_dim);
    for (int d = 0; d < feature_dim; ++d) {
      const auto& entry = js["obs"][static_cast<std::size_t>(d)];
      if (entry.is_null()) {
        step.obs(d) = std::numeric_limits<double>::quiet_NaN();
        step.mask(d) = 0.0;
      } else if (entry.is_number()) {
        step.obs(d) = entry.get<double>();
        step.mask(d) = 1.0;
      } else {
        fail(path, line, "steps[" + std::to_string(s) + "].obs[" + std::to_string(d) + "]", "must be number or null");
      }
    }
    if (!js.contains("action") || !js["action"].is_number_integer())
      fail(path, line, "steps[" + std::to_string(s) + "].action", "missing or not an integer");
    step.action = js["action"].get<int>();
    if (step.action < 0 || step.action >= a_max)
      fail(path, line, "steps[" + std::to_string(s) + "].action",
           "id " + std::to_string(step.action) + " out of range [0," + std::to_string(a_max) + ")");
    if (js.contains("reward") && !js["reward"].is_null()) {
      if (!js["reward"].is_number()) fail(path, line, "steps[" + std::to_string(s) + "].reward", "must be number or null");
      step.reward = js["reward"].get<double>();
    }
    step.terminal = (s + 1 == steps.size()) && ep.outcome != Outcome::kCensored;
    ep.steps.push_back(std::move(step));
  }
  try {
    validate_episode(ep, feature_dim);
  } catch (const std::exception& e) {
    fail(path, line, "steps", e.what());
  }
  return ep;
}

}  // namespace

EpisodeSet load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_episodes: cannot open " + path);
  EpisodeSet set;
  std::string text;
  int line_no = 0;
  bool have_meta = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (j.contains("meta")) {
      if (have_meta) fail(path, line_no, "meta", "duplicate header");
      const auto& meta = j["meta"];
      if (!meta.contains("D") || !meta["D"].is_number_integer() || meta["D"].get<int>() <= 0)
        fail(path, line_no, "meta.D", "missing or not a positive integer");
      set.feature_dim = meta["D"].get<int>();
      if (meta.contains("feature_names")) {
        for (const auto& name : meta["feature_names"]) set.feature_names.push_back(name.get<std::string>());
        if (static_cast<int>(set.feature_names.size()) != set.feature_dim)
          fail(path, line_no, "meta.feature_names", "length disagrees with D");
      }
      have_meta = true;
      continue;
    }
    if (!have_meta) fail(path, line_no, "meta", "first line must be the meta header");
    set.episodes.push_back(parse_episode(j, set.feature_dim, path, line_no));
  }
  if (!have_meta && !set.episodes.empty())
    throw std::runtime_error("load_episodes: " + path + " has no meta header");
  return set;
}

void save_episodes(const EpisodeSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_episodes: cannot open " + path);
  json meta;
  meta["meta"]["D"] = set.feature_dim;
  meta["meta"]["feature_names"] = set.feature_names;
  out << meta.dump() << "\n";
  for (const auto& ep : set.episodes) {
    json j;
    j["id"] = ep.id;
    j["schema"] = ep.schema;
    j["outcome"] = outcome_to_string(ep.outcome);
    json steps = json::array();
    for (const auto& step : ep.steps) {
      json js;
      js["t"] = step.time;
      json obs = json::array();
      for (int d = 0; d < step.obs.size(); ++d) {
        if (step.mask(d) == 1.0)
          obs.push_back(step.obs(d));
        else
          obs.push_back(nullptr);
      }
      js["obs"] = std::move(obs);
      js["action"] = step.action;
      if (step.reward)
        js["reward"] = *step.reward;
      else
        js["reward"] = nullptr;
      steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_episodes: write failed for " + path);
}

}  // namespace medrl
