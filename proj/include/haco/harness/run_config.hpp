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

#ifndef HACO__HARNESS__RUN_CONFIG_HPP_
#define HACO__HARNESS__RUN_CONFIG_HPP_

#include "haco/env/driving_env.hpp"
#include "haco/env/map.hpp"
#include "haco/guardian/guardian.hpp"
#include "haco/learner/learner.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace haco::harness
{

enum class Mode
{
  kHaco,
  kAblationA,  // sparse takeover: every intervention is held for many steps
  kAblationB,  // constant intervention cost instead of the cosine cost
  kAblationC,  // no intervention value in the policy objective
  kUnguardedRl,
  kBehaviorCloning,
};

std::string to_string(Mode mode);
/// Throws ConfigError for unknown names.
Mode mode_from_string(const std::string & name);

class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Desk-scale learner defaults (smaller networks and batches than TrainConfig{}).
learner::TrainConfig desk_train_config();
/// Scripted guardian defaults used by training runs (stall takeover on).
guardian::GuardianConfig desk_guardian_config();

struct RunConfig
{
  Mode mode = Mode::kHaco;
  env::EnvConfig env;
  env::Difficulty difficulty;
  guardian::GuardianConfig guardian = desk_guardian_config();
  learner::TrainConfig train = desk_train_config();
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> train_map_seeds = default_seeds(0, 20);
  std::vector<std::uint64_t> test_map_seeds = default_seeds(1000, 20);
  std::int64_t total_env_steps = 30000;
  int eval_every_iterations = 10;  // 0 disables periodic evaluation
  int eval_episodes_per_map = 2;
  double safety_penalty = 5.0;        // unguarded-rl reward shaping
  int ablation_a_takeover_steps = 10;  // held takeover length in ablation a
  std::int64_t demo_steps = 10000;     // behavior cloning
  int bc_gradient_steps = 10000;
  /// Replace the env reward by zeros at the source. Not part of the config
  /// hash: HACO modes must not depend on it.
  bool zero_reward = false;
  std::string output_dir;

  /// Throws ConfigError describing the first problem found.
  void validate() const;

  /// Guardian and learner settings with the mode applied.
  guardian::GuardianConfig effective_guardian() const;
  learner::TrainConfig effective_train() const;

  static std::vector<std::uint64_t> default_seeds(std::uint64_t first, int count);
};

nlohmann::json to_json(const RunConfig & cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json & j);
RunConfig load_run_config(const std::filesystem::path & path);

/// FNV-1a over the canonical JSON, without output_dir and zero_reward.
std::uint64_t config_hash(const RunConfig & cfg);

/// `dir` when absolute; otherwise resolved under $HACO_OUTPUT_ROOT if set.
std::filesystem::path resolve_output_dir(const std::string & dir);

}  // namespace haco::harness

#endif  // HACO__HARNESS__RUN_CONFIG_HPP_
