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

#ifndef HACO__GUARDIAN__TOLERANCE_HPP_
#define HACO__GUARDIAN__TOLERANCE_HPP_

#include "haco/guardian/guardian.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace haco::guardian
{

struct ToleranceConfig
{
  int n_states = 200;
  int n_actions = 256;
  int n_expert_samples = 16;  // expert draws per state (the expert may be stochastic)
  int state_stride = 5;       // keep every k-th visited state
  std::uint64_t seed = 7;
};

/// Monte Carlo estimates of the guardian's action error rate, intervention
/// miss rate and tolerance K' (un-flagged action volume, max 4 on [-1, 1]^2).
///
/// The hat quantities are maxima over sampled states of per-state rates:
/// epsilon_hat = P(expert action unsafe | s), kappa_hat = P(uniform action is
/// unsafe and not flagged | s), k_prime_hat = 4 * P(uniform action not flagged | s).
/// The *_mean fields are batch averages: fraction of all expert draws that are
/// unsafe, and fraction of unsafe uniform actions that went unflagged.
struct ToleranceEstimate
{
  double epsilon_hat = 0.0;
  double kappa_hat = 0.0;
  double k_prime_hat = 0.0;
  double epsilon_mean = 0.0;
  double kappa_mean = 0.0;
  std::int64_t states = 0;
  std::int64_t action_samples = 0;
  std::int64_t expert_samples = 0;
  std::int64_t unsafe_actions = 0;
  std::int64_t missed_unsafe_actions = 0;
  std::int64_t unsafe_expert_actions = 0;
};

constexpr double kActionVolume = 4.0;

/// True when one step of `action` from `state` enters an unsafe state
/// (new obstacle contact or out of road).
bool step_is_unsafe(
  const env::SimState & state, const Action & action, const MapSpec & map,
  const env::EnvConfig & env_cfg);

struct SampledState
{
  env::SimState state;
  std::shared_ptr<const MapSpec> map;
};

/// States visited by a uniform-random agent driving under a clone of `guardian`.
std::vector<SampledState> sample_guarded_states(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const MapSpec>> maps, int n_states, int stride,
  std::uint64_t seed);

ToleranceEstimate estimate_tolerance(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const MapSpec>> maps, const ToleranceConfig & cfg);

/// Same estimate on a fixed state sample. The guardian is cloned so its noise
/// stream is left untouched.
ToleranceEstimate estimate_tolerance_on(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const SampledState> states, int n_actions, int n_expert_samples,
  std::uint64_t seed);

void write_tolerance_csv_header(std::ostream & out);
void write_tolerance_csv_row(std::ostream & out, const ToleranceEstimate & estimate);

}  // namespace haco::guardian

#endif  // HACO__GUARDIAN__TOLERANCE_HPP_
