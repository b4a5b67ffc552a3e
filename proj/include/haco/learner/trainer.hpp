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

#ifndef HACO__LEARNER__TRAINER_HPP_
#define HACO__LEARNER__TRAINER_HPP_

#include "haco/env/driving_env.hpp"
#include "haco/guardian/guardian.hpp"
#include "haco/learner/learner.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace haco::learner
{

/// Which reward, if any, reaches the learner. HACO modes use kNone; the
/// reward-shaped baseline uses kShaped (env reward minus a penalty per
/// safety violation).
enum class RewardChannel { kNone, kShaped };

struct TrainerOptions
{
  RewardChannel reward_channel = RewardChannel::kNone;
  double safety_penalty = 5.0;
  /// Replace the environment reward by zeros at the source.
  bool zero_reward = false;
};

struct EpisodeMetrics
{
  std::int64_t env_step = 0;  // total env steps at episode end
  std::int64_t episode = 0;
  std::uint64_t map_seed = 0;
  int steps = 0;
  int takeover_steps = 0;
  double takeover_rate = 0.0;
  double intervention_cost = 0.0;
  int safety_violations = 0;  // contacts plus out-of-road, observed by the harness
  std::int64_t cumulative_safety_violations = 0;
  bool success = false;
  bool out_of_road = false;
  double env_return = 0.0;
  Diagnostics diagnostics;  // most recent update
};

struct TickRecord
{
  Action agent_action = Action::Zero();
  guardian::GuardianDecision decision;
  Action applied = Action::Zero();
  double rising_cost = 0.0;
  bool cost_degenerate = false;
  env::StepResult result;
  bool episode_end = false;
  std::size_t slot = 0;  // buffer slot written
};

/// The training workflow: sample a_n, let the guardian decide, apply the
/// executed action, charge the intervention cost on the rising edge, buffer
/// the transition and queue updates every `steps_per_iteration` env steps.
/// Scripted runs call step(); the live copilot calls propose(), commit() and
/// run_updates() separately.
class Trainer
{
public:
  Trainer(
    env::EnvConfig env_cfg, TrainConfig cfg, std::vector<std::shared_ptr<const env::MapSpec>> maps,
    std::uint64_t seed, TrainerOptions options = {});

  /// Agent action for the current observation from the action stream.
  Action propose();
  /// Executes one env step with the guardian's decision about `agent_action`.
  TickRecord commit(const Action & agent_action, const guardian::GuardianDecision & decision);
  /// propose + guardian.decide + commit + all pending updates.
  TickRecord step(guardian::Guardian & guardian);

  int pending_updates() const { return pending_updates_; }
  /// Runs up to `max_steps` of the queued gradient steps.
  Diagnostics run_updates(int max_steps);

  /// Called at the first tick of every episode so the caller can reset its guardian.
  bool at_episode_start() const { return episode_steps_ == 0; }

  const LearnerState & learner() const { return learner_; }
  LearnerState & learner() { return learner_; }
  const ReplayBuffer & buffer() const { return buffer_; }
  std::span<const double> rewards() const;
  const env::DrivingEnv & env() const { return env_; }
  const Observation & observation() const { return obs_; }
  const TrainConfig & config() const { return cfg_; }
  const Diagnostics & last_diagnostics() const { return last_diag_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return episode_; }
  std::int64_t total_takeover_steps() const { return total_takeover_steps_; }
  std::int64_t cumulative_safety_violations() const { return cumulative_violations_; }
  int episode_steps() const { return episode_steps_; }
  int episode_takeover_steps() const { return episode_takeovers_; }
  double episode_intervention_cost() const { return episode_cost_; }
  std::int64_t degenerate_costs() const { return degenerate_costs_; }

  std::function<void(const EpisodeMetrics &)> on_episode;

private:
  void begin_episode();

  env::EnvConfig env_cfg_;
  TrainConfig cfg_;
  TrainerOptions options_;
  std::vector<std::shared_ptr<const env::MapSpec>> maps_;
  env::DrivingEnv env_;
  LearnerState learner_;
  ReplayBuffer buffer_;
  std::vector<double> rewards_;
  std::mt19937_64 action_rng_;
  Observation obs_;
  Diagnostics last_diag_;
  int pending_updates_ = 0;
  std::int64_t env_steps_ = 0;
  std::int64_t episode_ = 0;
  std::int64_t total_takeover_steps_ = 0;
  std::int64_t cumulative_violations_ = 0;
  std::int64_t degenerate_costs_ = 0;
  int episode_steps_ = 0;
  int episode_takeovers_ = 0;
  int episode_violations_ = 0;
  double episode_cost_ = 0.0;
  double episode_return_ = 0.0;
  bool prev_intervened_ = false;
};

struct TrainingHooks
{
  std::function<void(const EpisodeMetrics &)> on_episode;
  /// After each queued block of updates: (iteration count, diagnostics).
  std::function<void(std::int64_t, const Diagnostics &)> on_iteration;
};

/// Drives `trainer` with `guardian` until `total_env_steps` env steps.
void run_training(
  Trainer & trainer, guardian::Guardian & guardian, std::int64_t total_env_steps,
  const TrainingHooks & hooks = {});

}  // namespace haco::learner

#endif  // HACO__LEARNER__TRAINER_HPP_
