// Copyright 2026 The haco-copilot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "haco/harness/run_config.hpp"

#include "haco/numeric/checkpoint.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

namespace haco::harness
{

using nlohmann::json;

namespace
{

struct ModeName
{
  Mode mode;
  const char * name;
};

constexpr ModeName kModeNames[] = {
  {Mode::kHaco, "haco"},
  {Mode::kAblationA, "haco-ablation-a"},
  {Mode::kAblationB, "haco-ablation-b"},
  {Mode::kAblationC, "haco-ablation-c"},
  {Mode::kUnguardedRl, "unguarded-rl"},
  {Mode::kBehaviorCloning, "behavior-cloning"},
};

// Reads known keys from an object and rejects leftovers.
class Reader
{
public:
  Reader(const json & j, std::string where) : j_(j), where_(std::move(where))
  {
    if (!j_.is_object()) {
      throw ConfigError(where_ + ": expected an object");
    }
  }

  template <class T>
  void get(const char * key, T & out)
  {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception & e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json * child(const char * key)
  {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const
  {
    for (const auto & item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

private:
  const json & j_;
  std::string where_;
  std::set<std::string> seen_;
};

json env_to_json(const env::EnvConfig & c)
{
  return {
    {"dt", c.dt},
    {"wheelbase", c.wheelbase},
    {"max_speed", c.max_speed},
    {"max_accel", c.max_accel},
    {"max_steer", c.max_steer},
    {"car_radius", c.car_radius},
    {"lidar_rays", c.lidar_rays},
    {"lidar_range", c.lidar_range},
    {"horizon", c.horizon},
    {"progress_weight", c.progress_weight},
    {"speed_weight", c.speed_weight},
    {"success_reward", c.success_reward},
    {"success_margin", c.success_margin},
    {"contact_damping", c.contact_damping},
    {"lookahead_distances", c.lookahead_distances},
  };
}

void env_from_json(const json & j, env::EnvConfig & c)
{
  Reader r(j, "env");
  r.get("dt", c.dt);
  r.get("wheelbase", c.wheelbase);
  r.get("max_speed", c.max_speed);
  r.get("max_accel", c.max_accel);
  r.get("max_steer", c.max_steer);
  r.get("car_radius", c.car_radius);
  r.get("lidar_rays", c.lidar_rays);
  r.get("lidar_range", c.lidar_range);
  r.get("horizon", c.horizon);
  r.get("progress_weight", c.progress_weight);
  r.get("speed_weight", c.speed_weight);
  r.get("success_reward", c.success_reward);
  r.get("success_margin", c.success_margin);
  r.get("contact_damping", c.contact_damping);
  r.get("lookahead_distances", c.lookahead_distances);
  r.finish();
}

json difficulty_to_json(const env::Difficulty & d)
{
  return {
    {"min_segments", d.min_segments},
    {"max_segments", d.max_segments},
    {"spawn_straight", d.spawn_straight},
    {"min_straight", d.min_straight},
    {"max_straight", d.max_straight},
    {"min_radius", d.min_radius},
    {"max_radius", d.max_radius},
    {"min_angle", d.min_angle},
    {"max_angle", d.max_angle},
    {"obstacle_density", d.obstacle_density},
    {"obstacle_min_radius", d.obstacle_min_radius},
    {"obstacle_max_radius", d.obstacle_max_radius},
    {"obstacle_spacing", d.obstacle_spacing},
    {"min_corridor", d.min_corridor},
  };
}

void difficulty_from_json(const json & j, env::Difficulty & d)
{
  Reader r(j, "difficulty");
  r.get("min_segments", d.min_segments);
  r.get("max_segments", d.max_segments);
  r.get("spawn_straight", d.spawn_straight);
  r.get("min_straight", d.min_straight);
  r.get("max_straight", d.max_straight);
  r.get("min_radius", d.min_radius);
  r.get("max_radius", d.max_radius);
  r.get("min_angle", d.min_angle);
  r.get("max_angle", d.max_angle);
  r.get("obstacle_density", d.obstacle_density);
  r.get("obstacle_min_radius", d.obstacle_min_radius);
  r.get("obstacle_max_radius", d.obstacle_max_radius);
  r.get("obstacle_spacing", d.obstacle_spacing);
  r.get("min_corridor", d.min_corridor);
  r.finish();
}

json guardian_to_json(const guardian::GuardianConfig & g)
{
  const auto & e = g.expert;
  return {
    {"horizon_steps", g.horizon_steps},
    {"lateral_margin", g.lateral_margin},
    {"ttc_threshold", g.ttc_threshold},
    {"min_takeover_duration", g.min_takeover_duration},
    {"stall_steps", g.stall_steps},
    {"stall_speed", g.stall_speed},
    {"stall_throttle", g.stall_throttle},
    {"expert",
     {
       {"cruise_speed", e.cruise_speed},
       {"speed_gain", e.speed_gain},
       {"lookahead_base", e.lookahead_base},
       {"lookahead_gain", e.lookahead_gain},
       {"lookahead_max", e.lookahead_max},
       {"pass_offset_limit", e.pass_offset_limit},
       {"avoid_before", e.avoid_before},
       {"avoid_hold_before", e.avoid_hold_before},
       {"avoid_hold_after", e.avoid_hold_after},
       {"avoid_after", e.avoid_after},
       {"safety_fallback", e.safety_fallback},
     }},
  };
}

void guardian_from_json(const json & j, guardian::GuardianConfig & g)
{
  Reader r(j, "guardian");
  r.get("horizon_steps", g.horizon_steps);
  r.get("lateral_margin", g.lateral_margin);
  r.get("ttc_threshold", g.ttc_threshold);
  r.get("min_takeover_duration", g.min_takeover_duration);
  r.get("stall_steps", g.stall_steps);
  r.get("stall_speed", g.stall_speed);
  r.get("stall_throttle", g.stall_throttle);
  if (const json * ej = r.child("expert")) {
    auto & e = g.expert;
    Reader er(*ej, "guardian.expert");
    er.get("cruise_speed", e.cruise_speed);
    er.get("speed_gain", e.speed_gain);
    er.get("lookahead_base", e.lookahead_base);
    er.get("lookahead_gain", e.lookahead_gain);
    er.get("lookahead_max", e.lookahead_max);
    er.get("pass_offset_limit", e.pass_offset_limit);
    er.get("avoid_before", e.avoid_before);
    er.get("avoid_hold_before", e.avoid_hold_before);
    er.get("avoid_hold_after", e.avoid_hold_after);
    er.get("avoid_after", e.avoid_after);
    er.get("safety_fallback", e.safety_fallback);
    er.finish();
  }
  r.finish();
}

const char * normalization_name(learner::ConservativeNormalization n)
{
  return n == learner::ConservativeNormalization::kBatch ? "batch" : "intervened";
}

json train_to_json(const learner::TrainConfig & t)
{
  return {
    {"gamma", t.gamma},
    {"tau", t.tau},
    {"learning_rate", t.learning_rate},
    {"batch_size", t.batch_size},
    {"cql_weight", t.cql_weight},
    {"target_entropy", t.target_entropy},
    {"conventional_target_entropy", t.conventional_target_entropy},
    {"initial_alpha", t.initial_alpha},
    {"learning_starts", t.learning_starts},
    {"steps_per_iteration", t.steps_per_iteration},
    {"gradient_steps_per_iteration", t.gradient_steps_per_iteration},
    {"buffer_capacity", t.buffer_capacity},
    {"conservative_normalization", normalization_name(t.conservative_normalization)},
    {"cost_mode", t.cost_mode == learner::CostMode::kCosine ? "cosine" : "constant"},
    {"use_qint", t.use_qint},
    {"qint_target_network", t.qint_target_network},
    {"hidden", t.network.hidden},
    {"activation", t.network.activation == numeric::Activation::kRelu ? "relu" : "tanh"},
  };
}

void train_from_json(const json & j, learner::TrainConfig & t)
{
  Reader r(j, "train");
  r.get("gamma", t.gamma);
  r.get("tau", t.tau);
  r.get("learning_rate", t.learning_rate);
  r.get("batch_size", t.batch_size);
  r.get("cql_weight", t.cql_weight);
  r.get("target_entropy", t.target_entropy);
  r.get("conventional_target_entropy", t.conventional_target_entropy);
  r.get("initial_alpha", t.initial_alpha);
  r.get("learning_starts", t.learning_starts);
  r.get("steps_per_iteration", t.steps_per_iteration);
  r.get("gradient_steps_per_iteration", t.gradient_steps_per_iteration);
  r.get("buffer_capacity", t.buffer_capacity);
  std::string norm = normalization_name(t.conservative_normalization);
  r.get("conservative_normalization", norm);
  if (norm == "batch") {
    t.conservative_normalization = learner::ConservativeNormalization::kBatch;
  } else if (norm == "intervened") {
    t.conservative_normalization = learner::ConservativeNormalization::kIntervened;
  } else {
    throw ConfigError("train.conservative_normalization: expected 'batch' or 'intervened'");
  }
  std::string cost = t.cost_mode == learner::CostMode::kCosine ? "cosine" : "constant";
  r.get("cost_mode", cost);
  if (cost == "cosine") {
    t.cost_mode = learner::CostMode::kCosine;
  } else if (cost == "constant") {
    t.cost_mode = learner::CostMode::kConstant;
  } else {
    throw ConfigError("train.cost_mode: expected 'cosine' or 'constant'");
  }
  r.get("use_qint", t.use_qint);
  r.get("qint_target_network", t.qint_target_network);
  r.get("hidden", t.network.hidden);
  std::string act = t.network.activation == numeric::Activation::kRelu ? "relu" : "tanh";
  r.get("activation", act);
  if (act == "relu") {
    t.network.activation = numeric::Activation::kRelu;
  } else if (act == "tanh") {
    t.network.activation = numeric::Activation::kTanh;
  } else {
    throw ConfigError("train.activation: expected 'relu' or 'tanh'");
  }
  r.finish();
}

void require(bool ok, const std::string & message)
{
  if (!ok) {
    throw ConfigError(message);
  }
}

}  // namespace

std::string to_string(Mode mode)
{
  for (const auto & m : kModeNames) {
    if (m.mode == mode) {
      return m.name;
    }
  }
  return "unknown";
}

Mode mode_from_string(const std::string & name)
{
  for (const auto & m : kModeNames) {
    if (name == m.name) {
      return m.mode;
    }
  }
  throw ConfigError("unknown mode '" + name + "'");
}

learner::TrainConfig desk_train_config()
{
  learner::TrainConfig t;
  t.network.hidden = {128, 128};
  t.batch_size = 128;
  t.initial_alpha = 0.01;
  return t;
}

guardian::GuardianConfig desk_guardian_config()
{
  guardian::GuardianConfig g;
  g.stall_steps = 1;
  g.stall_speed = 3.0;
  g.stall_throttle = 0.3;
  return g;
}

std::vector<std::uint64_t> RunConfig::default_seeds(std::uint64_t first, int count)
{
  std::vector<std::uint64_t> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = first + static_cast<std::uint64_t>(i);
  }
  return out;
}

void RunConfig::validate() const
{
  try {
    train.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  require(!train_map_seeds.empty(), "train_map_seeds must not be empty");
  require(!test_map_seeds.empty(), "test_map_seeds must not be empty");
  const std::set<std::uint64_t> train_set(train_map_seeds.begin(), train_map_seeds.end());
  const std::set<std::uint64_t> test_set(test_map_seeds.begin(), test_map_seeds.end());
  require(train_set.size() == train_map_seeds.size(), "train_map_seeds contains duplicates");
  require(test_set.size() == test_map_seeds.size(), "test_map_seeds contains duplicates");
  for (const auto s : test_set) {
    require(!train_set.count(s), "train and test map seeds overlap at " + std::to_string(s));
  }
  if (mode != Mode::kBehaviorCloning) {
    require(
      total_env_steps > train.learning_starts,
      "total_env_steps must exceed train.learning_starts");
  }
  require(eval_every_iterations >= 0, "eval_every_iterations must be >= 0");
  require(eval_episodes_per_map >= 1, "eval_episodes_per_map must be >= 1");
  require(safety_penalty >= 0.0, "safety_penalty must be >= 0");
  require(ablation_a_takeover_steps >= 1, "ablation_a_takeover_steps must be >= 1");
  require(demo_steps >= 0, "demo_steps must be >= 0");
  require(bc_gradient_steps >= 0, "bc_gradient_steps must be >= 0");
  require(env.dt > 0.0 && env.wheelbase > 0.0 && env.max_speed > 0.0, "env: dt, wheelbase and max_speed must be > 0");
  require(env.lidar_rays >= 1 && env.lidar_range > 0.0, "env: lidar needs rays >= 1 and range > 0");
  require(env.horizon >= 1, "env.horizon must be >= 1");
  require(
    difficulty.min_segments >= 0 && difficulty.max_segments >= difficulty.min_segments,
    "difficulty: segment counts out of order");
  require(guardian.horizon_steps >= 0, "guardian.horizon_steps must be >= 0");
  require(guardian.min_takeover_duration >= 1, "guardian.min_takeover_duration must be >= 1");
  require(guardian.stall_steps >= 0, "guardian.stall_steps must be >= 0");
}

guardian::GuardianConfig RunConfig::effective_guardian() const
{
  guardian::GuardianConfig g = guardian;
  if (mode == Mode::kAblationA) {
    g.min_takeover_duration = ablation_a_takeover_steps;
  }
  return g;
}

learner::TrainConfig RunConfig::effective_train() const
{
  learner::TrainConfig t = train;
  if (mode == Mode::kAblationB) {
    t.cost_mode = learner::CostMode::kConstant;
  }
  if (mode == Mode::kAblationC) {
    t.use_qint = false;
  }
  return t;
}

json to_json(const RunConfig & cfg)
{
  return {
    {"mode", to_string(cfg.mode)},
    {"env", env_to_json(cfg.env)},
    {"difficulty", difficulty_to_json(cfg.difficulty)},
    {"guardian", guardian_to_json(cfg.guardian)},
    {"train", train_to_json(cfg.train)},
    {"seed", cfg.seed},
    {"train_map_seeds", cfg.train_map_seeds},
    {"test_map_seeds", cfg.test_map_seeds},
    {"total_env_steps", cfg.total_env_steps},
    {"eval_every_iterations", cfg.eval_every_iterations},
    {"eval_episodes_per_map", cfg.eval_episodes_per_map},
    {"safety_penalty", cfg.safety_penalty},
    {"ablation_a_takeover_steps", cfg.ablation_a_takeover_steps},
    {"demo_steps", cfg.demo_steps},
    {"bc_gradient_steps", cfg.bc_gradient_steps},
    {"zero_reward", cfg.zero_reward},
    {"output_dir", cfg.output_dir},
  };
}

RunConfig run_config_from_json(const json & j)
{
  RunConfig cfg;
  Reader r(j, "config");
  std::string mode = to_string(cfg.mode);
  r.get("mode", mode);
  cfg.mode = mode_from_string(mode);
  if (const json * c = r.child("env")) {
    env_from_json(*c, cfg.env);
  }
  if (const json * c = r.child("difficulty")) {
    difficulty_from_json(*c, cfg.difficulty);
  }
  if (const json * c = r.child("guardian")) {
    guardian_from_json(*c, cfg.guardian);
  }
  if (const json * c = r.child("train")) {
    train_from_json(*c, cfg.train);
  }
  r.get("seed", cfg.seed);
  r.get("train_map_seeds", cfg.train_map_seeds);
  r.get("test_map_seeds", cfg.test_map_seeds);
  r.get("total_env_steps", cfg.total_env_steps);
  r.get("eval_every_iterations", cfg.eval_every_iterations);
  r.get("eval_episodes_per_map", cfg.eval_episodes_per_map);
  r.get("safety_penalty", cfg.safety_penalty);
  r.get("ablation_a_takeover_steps", cfg.ablation_a_takeover_steps);
  r.get("demo_steps", cfg.demo_steps);
  r.get("bc_gradient_steps", cfg.bc_gradient_steps);
  r.get("zero_reward", cfg.zero_reward);
  r.get("output_dir", cfg.output_dir);
  r.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception & e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::uint64_t config_hash(const RunConfig & cfg)
{
  json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("zero_reward");
  return numeric::fnv1a64(j.dump());
}

std::filesystem::path resolve_output_dir(const std::string & dir)
{
  const std::filesystem::path p(dir);
  if (p.is_absolute()) {
    return p;
  }
  if (const char * root = std::getenv("HACO_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / p;
  }
  return p;
}

}  // namespace haco::harness
