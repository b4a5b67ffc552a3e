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

#ifndef HACO__LEARNER__LEARNER_HPP_
#define HACO__LEARNER__LEARNER_HPP_

#include "haco/learner/losses.hpp"
#include "haco/learner/replay_buffer.hpp"
#include "haco/numeric/checkpoint.hpp"
#include "haco/numeric/optim.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace haco::learner
{

struct NetworkConfig
{
  std::vector<int> hidden{256, 256};
  numeric::Activation activation = numeric::Activation::kRelu;
};

enum class CostMode { kCosine, kConstant };

struct TrainConfig
{
  double gamma = 0.99;
  double tau = 0.005;
  double learning_rate = 1e-4;
  int batch_size = 256;
  double cql_weight = 10.0;
  double target_entropy = 2.0;
  /// Use -action_dim instead of `target_entropy`.
  bool conventional_target_entropy = false;
  double initial_alpha = 1.0;
  int learning_starts = 100;
  int steps_per_iteration = 100;
  int gradient_steps_per_iteration = 100;
  std::size_t buffer_capacity = 50000;
  ConservativeNormalization conservative_normalization = ConservativeNormalization::kBatch;
  CostMode cost_mode = CostMode::kCosine;
  bool use_qint = true;  // include Q_int in the policy objective
  bool qint_target_network = false;
  NetworkConfig network;

  double effective_target_entropy() const;
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

inline constexpr int kActionDim = 2;

struct LearnerState
{
  ParamSet policy;
  ParamSet q1;
  ParamSet q2;
  ParamSet q1_target;
  ParamSet q2_target;
  ParamSet qint;
  ParamSet qint_target;
  numeric::OptState policy_opt;
  numeric::OptState q1_opt;
  numeric::OptState q2_opt;
  numeric::OptState qint_opt;
  double log_alpha = 0.0;
  numeric::ScalarOptState alpha_opt;
  std::int64_t gradient_steps = 0;
  std::int64_t iterations = 0;
  std::mt19937_64 update_rng;

  double alpha() const;
  bool operator==(const LearnerState & other) const;
};

LearnerState make_learner(Eigen::Index obs_dim, const TrainConfig & cfg, std::uint64_t seed);

struct Diagnostics
{
  bool warming_up = false;
  bool aborted = false;
  int gradient_steps = 0;
  double q_loss = 0.0;  // both critics, summed
  double td_loss = 0.0;
  double conservative = 0.0;
  double qint_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // -mean log pi
  double q_gap = 0.0;    // mean Q(s, a_h) - Q(s, a_n) over intervened samples
  std::int64_t intervened_samples = 0;
  std::string message;
};

/// One update of every network on a fresh batch. `rewards` is indexed by
/// buffer slot and is empty for reward-free training. Throws
/// numeric::NonFiniteError when a loss or gradient is not finite.
Diagnostics gradient_step(
  LearnerState & state, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg);

/// `n` gradient steps. Below `learning_starts` transitions nothing happens and
/// the diagnostics say so. A non-finite loss restores the state held at entry
/// and reports `aborted`.
Diagnostics train_steps(
  LearnerState & state, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg, int n);

/// train_steps with the configured gradient steps per iteration.
Diagnostics train_iteration(
  LearnerState & state, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg);

/// Stochastic action for one observation given standard-normal noise.
Action sample_action(const ParamSet & policy, const Observation & obs, const Vector & noise);
/// tanh(mean), used for evaluation.
Action mean_action(const ParamSet & policy, const Observation & obs);

numeric::Checkpoint to_checkpoint(const LearnerState & state, std::uint64_t config_hash);
LearnerState from_checkpoint(const numeric::Checkpoint & ckpt);

std::string rng_to_string(const std::mt19937_64 & rng);
std::mt19937_64 rng_from_string(const std::string & text);

}  // namespace haco::learner

#endif  // HACO__LEARNER__LEARNER_HPP_
