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

#ifndef HACO__HARNESS__EVALUATION_HPP_
#define HACO__HARNESS__EVALUATION_HPP_

#include "haco/env/driving_env.hpp"
#include "haco/guardian/guardian.hpp"
#include "haco/learner/learner.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace haco::harness
{

using MapList = std::vector<std::shared_ptr<const env::MapSpec>>;

/// Maps for `seeds`, each resampled until the scripted expert completes it.
MapList make_maps(
  std::span<const std::uint64_t> seeds, const env::Difficulty & difficulty,
  const env::EnvConfig & env_cfg, const guardian::GuardianConfig & guardian_cfg);

struct EvalRow
{
  std::uint64_t map_seed = 0;
  int episode = 0;
  double env_return = 0.0;
  int safety_violations = 0;  // contacts plus out-of-road
  bool success = false;
  int steps = 0;
};

struct EvalResult
{
  std::vector<EvalRow> rows;
  double mean_return = 0.0;
  double mean_safety_violations = 0.0;
  double success_rate = 0.0;
  /// Guardian decisions made while evaluating; always 0.
  std::uint64_t guardian_decisions = 0;
};

/// Deterministic controller used for evaluation.
using Controller = std::function<env::Action(const env::Observation &, const env::EgoState &, const env::MapSpec &)>;

Controller policy_controller(const learner::ParamSet & policy);
Controller expert_controller(const env::EnvConfig & env_cfg, const guardian::GuardianConfig & cfg);

/// Rolls `controller` out alone (no guardian) for `episodes_per_map` episodes on every map.
EvalResult evaluate(
  const Controller & controller, const env::EnvConfig & env_cfg, const MapList & maps,
  std::span<const std::uint64_t> map_seeds, int episodes_per_map);

void write_eval_csv_header(std::ostream & out);
/// One row per episode; `env_step` is the training step the policy came from.
void write_eval_csv_rows(std::ostream & out, std::int64_t env_step, const EvalResult & result);

/// Q grid over the map's bounding box: at each cell centre the car is placed
/// with the lane heading at `speed`, the policy mean action is queried and
/// min(Q1, Q2) of that action is reported. Writes a header and rows * cols rows.
void export_q_heatmap(
  const learner::LearnerState & state, const env::MapSpec & map, const env::EnvConfig & env_cfg,
  int rows, int cols, double speed, std::ostream & out);

/// An intervened step observed with a frozen policy: (s, a_n, a_h).
struct InterventionSample
{
  env::Observation obs;
  env::Action agent_action;
  env::Action expert_action;
};

/// Drives the stochastic policy under a clone of `guardian` on `maps` until
/// `n` interventions are collected or `max_steps` env steps pass. Nothing is
/// learned or buffered.
std::vector<InterventionSample> collect_interventions(
  const learner::ParamSet & policy, const guardian::Guardian & guardian,
  const env::EnvConfig & env_cfg, const MapList & maps, std::size_t n, std::int64_t max_steps,
  std::uint64_t seed);

/// Mean over samples of min(Q1, Q2)(s, a_h) - min(Q1, Q2)(s, a_n).
double mean_q_gap(const learner::LearnerState & state, std::span<const InterventionSample> samples);

}  // namespace haco::harness

#endif  // HACO__HARNESS__EVALUATION_HPP_
