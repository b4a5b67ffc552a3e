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

#ifndef HACO__GUARDIAN__GUARDIAN_HPP_
#define HACO__GUARDIAN__GUARDIAN_HPP_

#include "haco/env/driving_env.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace haco::guardian
{

using env::Action;
using env::EgoState;
using env::MapSpec;

struct ExpertConfig
{
  double cruise_speed = 7.0;
  double speed_gain = 0.6;
  double lookahead_base = 4.0;
  double lookahead_gain = 0.6;  // seconds
  double lookahead_max = 10.0;
  double pass_offset_limit = 2.5;
  double avoid_before = 14.0;  // meters before an obstacle where the swerve starts
  double avoid_hold_before = 6.0;
  double avoid_hold_after = 3.0;
  double avoid_after = 9.0;
  bool safety_fallback = true;
};

struct GuardianConfig
{
  int horizon_steps = 10;
  double lateral_margin = 0.8;  // fraction of half road width
  double ttc_threshold = 1.0;   // seconds
  int min_takeover_duration = 1;
  /// Takeover when the car has stayed below `stall_speed` for `stall_steps`
  /// consecutive steps and the agent's throttle is at most `stall_throttle`;
  /// stall_steps = 0 disables the rule.
  int stall_steps = 0;
  double stall_speed = 1.0;
  double stall_throttle = 0.0;
  ExpertConfig expert;
};

/// Scripted stand-in for the human policy: pure pursuit toward a planned
/// lateral profile that swerves around obstacles, with a speed controller.
/// When `expert.safety_fallback` is set and the nominal command is predicted
/// to hit something within the guardian horizon, a constant-command search
/// picks the nearest safe alternative.
Action expert_action(
  const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg,
  const GuardianConfig & cfg);

/// Hazard predicate: constant-action lookahead over `horizon_steps` plus the
/// lateral-offset and time-to-collision margins. Pure.
bool should_intervene(
  const EgoState & state, const Action & agent_action, const MapSpec & map,
  const env::EnvConfig & env_cfg, const GuardianConfig & cfg);

/// Time until the ego circle meets an obstacle when holding heading and speed.
double time_to_collision(const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg);

/// True when the expert alone drives `map` to the destination with no
/// contact and without leaving the road.
bool expert_completes(const MapSpec & map, const env::EnvConfig & env_cfg, const GuardianConfig & cfg);

/// Map feasibility check built on expert_completes, for generate_map.
env::FeasibilityCheck expert_feasibility(const env::EnvConfig & env_cfg, const GuardianConfig & cfg);

struct GuardianDecision
{
  bool intervene = false;
  std::optional<Action> expert_action;  // present iff intervene
};

/// Process-wide count of decide() calls on scripted and constant guardians.
/// Evaluation asserts this does not move.
std::uint64_t decisions_made();

class Guardian
{
public:
  virtual ~Guardian() = default;

  /// Called at the start of each episode.
  virtual void reset_episode() {}
  /// Stateless intervention indicator I(s, a) as this guardian realizes it.
  virtual bool flags(const EgoState & state, const Action & agent_action, const MapSpec & map) = 0;
  /// a_h for the current state.
  virtual Action expert(const EgoState & state, const MapSpec & map) = 0;
  /// One step of supervision, including takeover bookkeeping.
  virtual GuardianDecision decide(
    const EgoState & state, const Action & agent_action, const MapSpec & map) = 0;
  virtual std::unique_ptr<Guardian> clone() const = 0;
};

class ScriptedGuardian : public Guardian
{
public:
  ScriptedGuardian(env::EnvConfig env_cfg, GuardianConfig cfg);

  void reset_episode() override;
  bool flags(const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  Action expert(const EgoState & state, const MapSpec & map) override;
  GuardianDecision decide(
    const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  std::unique_ptr<Guardian> clone() const override;

  const GuardianConfig & config() const { return cfg_; }

private:
  env::EnvConfig env_cfg_;
  GuardianConfig cfg_;
  int hold_remaining_ = 0;
  int slow_steps_ = 0;
};

/// Test double and baseline helper: intervenes on every step (always = true)
/// or never. The expert action comes from the scripted expert.
class ConstantGuardian : public Guardian
{
public:
  ConstantGuardian(bool always, env::EnvConfig env_cfg, GuardianConfig cfg = {});

  bool flags(const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  Action expert(const EgoState & state, const MapSpec & map) override;
  GuardianDecision decide(
    const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  std::unique_ptr<Guardian> clone() const override;

private:
  bool always_;
  env::EnvConfig env_cfg_;
  GuardianConfig cfg_;
};

struct NoiseConfig
{
  double epsilon = 0.0;      // probability the expert emits a uniform random action
  double kappa_lapse = 0.0;  // probability a firing intervention is suppressed
  std::uint64_t seed = 0;
};

/// Wraps a guardian so that its expert action is uniform on [-1, 1]^2 with
/// probability epsilon and its interventions are suppressed with probability
/// kappa_lapse. Draws come from a dedicated stream seeded by `cfg.seed`.
class NoisyGuardian : public Guardian
{
public:
  NoisyGuardian(std::unique_ptr<Guardian> base, NoiseConfig cfg);

  void reset_episode() override;
  bool flags(const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  Action expert(const EgoState & state, const MapSpec & map) override;
  GuardianDecision decide(
    const EgoState & state, const Action & agent_action, const MapSpec & map) override;
  std::unique_ptr<Guardian> clone() const override;

private:
  bool lapse();

  std::unique_ptr<Guardian> base_;
  NoiseConfig cfg_;
  std::mt19937_64 rng_;
};

std::unique_ptr<Guardian> apply_noise(std::unique_ptr<Guardian> guardian, const NoiseConfig & cfg);

struct GuardedStep
{
  Action applied;
  GuardianDecision decision;
  env::StepResult result;
};

/// Asks the guardian about `agent_action` and applies either it or the expert action.
GuardedStep guarded_step(const Action & agent_action, Guardian & guardian, env::DrivingEnv & env);

/// Behavior-policy mixture over a discrete action set:
/// pi_b(a) = pi_n(a) (1 - I(a)) + pi_h(a) G, G = sum_a' I(a') pi_n(a').
struct DiscreteMixture
{
  std::vector<double> behavior;
  double rejection_probability = 0.0;
};

DiscreteMixture mix_behavior_policy(
  std::span<const double> agent, std::span<const std::uint8_t> intervene,
  std::span<const double> expert);

}  // namespace haco::guardian

#endif  // HACO__GUARDIAN__GUARDIAN_HPP_
