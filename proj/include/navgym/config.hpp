#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "navgym/acnet.hpp"
#include "navgym/checkpoint.hpp"
#include "navgym/ga3c.hpp"
#include "navgym/sim_env.hpp"
#include "navgym/worldmap.hpp"

namespace navgym {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MapSpec {
  std::string path;
  double weight = 1.0;
};

struct CurriculumSpec {
  std::uint64_t from_episode = 0;
  std::vector<double> weights;
};

/// Everything a run needs, loaded from one JSON document. Every key has a
/// default; unknown keys are errors.
struct RunConfig {
  TrainConfig train;  // maps/curriculum are filled from map_specs on load_maps()
  std::vector<MapSpec> map_specs{{"maps/simple_room.map", 1.0}};
  std::vector<CurriculumSpec> curriculum_specs;
  EnvConfig env;
  NetShape net;
  OptimConfig optim;
  std::string output_dir = "runs/latest";
  std::filesystem::path base_dir = ".";  // where relative map paths resolve

  nlohmann::json to_json() const {
    using nlohmann::json;
    json maps = json::array();
    for (const auto& m : map_specs) maps.push_back({{"path", m.path}, {"weight", m.weight}});
    json cur = json::array();
    for (const auto& c : curriculum_specs) cur.push_back({{"from_episode", c.from_episode}, {"weights", c.weights}});
    const auto& t = train;
    const auto& r = env.robot;
    const auto& s = env.scanner;
    const auto& w = env.reward;
    return {
        {"output_dir", output_dir},
        {"train",
         {{"num_agents", t.num_agents},
          {"num_trainers", t.num_trainers},
          {"num_predictors", t.num_predictors},
          {"prediction_batch_max", t.prediction_batch_max},
          {"training_batch_size", t.training_batch_size},
          {"t_max", t.t_max},
          {"gamma", t.gamma},
          {"total_episodes", t.total_episodes},
          {"checkpoint_every", t.checkpoint_every},
          {"seed", t.seed},
          {"prediction_wait_us", t.prediction_wait_us},
          {"maps", maps},
          {"curriculum", cur}}},
        {"robot",
         {{"radius", r.radius},
          {"v_max", r.v_max},
          {"dt", r.dt},
          {"goal_radius", r.goal_radius},
          {"collision_substeps", r.collision_substeps},
          {"max_steps", r.max_steps},
          {"min_goal_distance", r.min_goal_distance},
          {"placement_margin", r.placement_margin}}},
        {"scanner",
         {{"num_beams", s.num_beams},
          {"fov_deg", s.fov_deg},
          {"angular_step_deg", s.angular_step_deg},
          {"max_range", s.max_range},
          {"min_range", s.min_range},
          {"noise_sigma", s.noise_sigma}}},
        {"reward",
         {{"goal", w.goal},
          {"collision", w.collision},
          {"timeout", w.timeout},
          {"progress_gain", w.progress_gain},
          {"orientation", w.orientation}}},
        {"network",
         {{"conv1_kernel", net.conv1_kernel},
          {"conv1_stride", net.conv1_stride},
          {"conv1_channels", net.conv1_channels},
          {"conv2_kernel", net.conv2_kernel},
          {"conv2_stride", net.conv2_stride},
          {"conv2_channels", net.conv2_channels},
          {"hidden", net.hidden},
          {"learning_rate", optim.learning_rate},
          {"entropy_beta", optim.loss.entropy_beta},
          {"value_coef", optim.loss.value_coef}}},
    };
  }

  /// Canonical text: keys sorted, compact.
  std::string canonical() const { return to_json().dump(); }
  std::uint64_t hash() const { return fnv1a64(canonical()); }

  /// Hash over the sections that decide whether a checkpoint fits this run
  /// (network, robot, scanner, reward).
  std::uint64_t model_hash() const {
    const auto j = to_json();
    nlohmann::json m = {{"network", j["network"]}, {"robot", j["robot"]}, {"scanner", j["scanner"]}, {"reward", j["reward"]}};
    return fnv1a64(m.dump());
  }

  void validate() const {
    try {
      env.robot.validate();
      env.scanner.validate();
      net.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (net.beams != env.scanner.num_beams) throw ConfigError("network input width must equal scanner.num_beams");
    if (!(optim.learning_rate > 0)) throw ConfigError("network.learning_rate must be > 0");
    if (map_specs.empty()) throw ConfigError("train.maps must list at least one map");
    for (const auto& c : curriculum_specs)
      if (c.weights.size() != map_specs.size())
        throw ConfigError("train.curriculum weights need one entry per map");
  }

  /// Loads every map and fills train.maps / train.curriculum.
  void load_maps() {
    train.maps.clear();
    for (const auto& m : map_specs) {
      std::filesystem::path p = m.path;
      if (p.is_relative() && !std::filesystem::exists(p) && std::filesystem::exists(base_dir / p)) p = base_dir / p;
      std::string text;
      try {
        text = read_file(p.string());
      } catch (const std::exception& e) {
        throw ConfigError("map '" + m.path + "': " + e.what());
      }
      try {
        auto map = std::make_shared<WorldMap>(load_map(text));
        train.maps.push_back({map->name, std::move(map), m.weight});
      } catch (const std::exception& e) {
        throw ConfigError("map '" + m.path + "': " + e.what());
      }
    }
    train.curriculum.clear();
    for (const auto& c : curriculum_specs) train.curriculum.push_back({c.from_episode, c.weights});
  }
};

namespace config_detail {

// Every key in `user` must exist in `defaults`; arrays are taken whole.
inline void merge_strict(nlohmann::json& target, const nlohmann::json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    auto& slot = target[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      const bool both_numbers = slot.is_number() && it.value().is_number();
      if (!both_numbers && slot.type() != it.value().type())
        throw ConfigError("config key '" + key + "' has the wrong type");
      slot = it.value();
    }
  }
}

template <class T>
T get(const nlohmann::json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + section + "." + key + "': " + e.what());
  }
}

}  // namespace config_detail

/// Applies a JSON document (already parsed) on top of `base`.
inline RunConfig apply_config(const RunConfig& base, const nlohmann::json& user) {
  using config_detail::get;
  nlohmann::json j = base.to_json();
  config_detail::merge_strict(j, user, "");

  RunConfig c = base;
  c.output_dir = j.at("output_dir").get<std::string>();
  auto& t = c.train;
  t.num_agents = get<int>(j, "train", "num_agents");
  t.num_trainers = get<int>(j, "train", "num_trainers");
  t.num_predictors = get<int>(j, "train", "num_predictors");
  t.prediction_batch_max = get<int>(j, "train", "prediction_batch_max");
  t.training_batch_size = get<int>(j, "train", "training_batch_size");
  t.t_max = get<int>(j, "train", "t_max");
  t.gamma = get<double>(j, "train", "gamma");
  t.total_episodes = get<std::uint64_t>(j, "train", "total_episodes");
  t.checkpoint_every = get<std::uint64_t>(j, "train", "checkpoint_every");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.prediction_wait_us = get<int>(j, "train", "prediction_wait_us");
  c.map_specs.clear();
  for (const auto& m : j["train"]["maps"]) {
    for (auto it = m.begin(); it != m.end(); ++it)
      if (it.key() != "path" && it.key() != "weight") throw ConfigError("unknown config key 'train.maps[]." + it.key() + "'");
    c.map_specs.push_back({m.at("path").get<std::string>(), m.value("weight", 1.0)});
  }
  c.curriculum_specs.clear();
  for (const auto& s : j["train"]["curriculum"]) {
    for (auto it = s.begin(); it != s.end(); ++it)
      if (it.key() != "from_episode" && it.key() != "weights")
        throw ConfigError("unknown config key 'train.curriculum[]." + it.key() + "'");
    c.curriculum_specs.push_back({s.at("from_episode").get<std::uint64_t>(), s.at("weights").get<std::vector<double>>()});
  }
  auto& r = c.env.robot;
  r.radius = get<double>(j, "robot", "radius");
  r.v_max = get<double>(j, "robot", "v_max");
  r.dt = get<double>(j, "robot", "dt");
  r.goal_radius = get<double>(j, "robot", "goal_radius");
  r.collision_substeps = get<int>(j, "robot", "collision_substeps");
  r.max_steps = get<int>(j, "robot", "max_steps");
  r.min_goal_distance = get<double>(j, "robot", "min_goal_distance");
  r.placement_margin = get<double>(j, "robot", "placement_margin");
  auto& s = c.env.scanner;
  s.num_beams = get<int>(j, "scanner", "num_beams");
  s.fov_deg = get<double>(j, "scanner", "fov_deg");
  s.angular_step_deg = get<double>(j, "scanner", "angular_step_deg");
  s.max_range = get<double>(j, "scanner", "max_range");
  s.min_range = get<double>(j, "scanner", "min_range");
  s.noise_sigma = get<double>(j, "scanner", "noise_sigma");
  auto& w = c.env.reward;
  w.goal = get<double>(j, "reward", "goal");
  w.collision = get<double>(j, "reward", "collision");
  w.timeout = get<double>(j, "reward", "timeout");
  w.progress_gain = get<double>(j, "reward", "progress_gain");
  w.orientation = get<double>(j, "reward", "orientation");
  auto& n = c.net;
  n.beams = s.num_beams;
  n.conv1_kernel = get<int>(j, "network", "conv1_kernel");
  n.conv1_stride = get<int>(j, "network", "conv1_stride");
  n.conv1_channels = get<int>(j, "network", "conv1_channels");
  n.conv2_kernel = get<int>(j, "network", "conv2_kernel");
  n.conv2_stride = get<int>(j, "network", "conv2_stride");
  n.conv2_channels = get<int>(j, "network", "conv2_channels");
  n.hidden = get<int>(j, "network", "hidden");
  c.optim.learning_rate = get<double>(j, "network", "learning_rate");
  c.optim.loss.entropy_beta = get<double>(j, "network", "entropy_beta");
  c.optim.loss.value_coef = get<double>(j, "network", "value_coef");
  c.validate();
  return c;
}

inline RunConfig parse_config(std::string_view text, const RunConfig& base = {}) {
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return apply_config(base, user);
}

inline RunConfig load_config_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  RunConfig c = parse_config(text);
  c.base_dir = std::filesystem::path(path).parent_path();
  if (c.base_dir.empty()) c.base_dir = ".";
  return c;
}

/// Applies `section.key=value` overrides. The value is parsed as JSON when
/// possible, otherwise taken as a string.
inline RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& overrides) {
  nlohmann::json user = nlohmann::json::object();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    nlohmann::json* node = &user;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + o + "' has an empty key segment");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  RunConfig c = apply_config(base, user);
  c.base_dir = base.base_dir;
  return c;
}

}  // namespace navgym
