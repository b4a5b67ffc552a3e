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

#ifndef HACO__LEARNER__LOSSES_HPP_
#define HACO__LEARNER__LOSSES_HPP_

#include "haco/learner/replay_buffer.hpp"
#include "haco/numeric/mlp.hpp"
#include "haco/numeric/squashed_gaussian.hpp"

namespace haco::learner
{

using numeric::ParamSet;

struct CostResult
{
  double value = 0.0;
  bool degenerate = false;  // a zero-length action; value is then 1
};

/// 1 - cos(a_n, a_h), in [0, 2].
CostResult intervention_cost(const Action & agent_action, const Action & expert_action);

/// raw_cost on the first step of a takeover, 0 otherwise.
double rising_edge_cost(bool intervened_now, bool intervened_prev, double raw_cost);

/// Critic input: observation rows stacked over action rows.
Matrix critic_input(const Matrix & obs, const Matrix & action);

struct PolicyPass
{
  numeric::ForwardTrace trace;
  numeric::PolicySample sample;
};

PolicyPass policy_forward(const ParamSet & policy, const Matrix & obs, const Matrix & noise);

/// y = (1 - d) * gamma * (min_i Q'_i(s', a') - alpha * log pi(a'|s')), plus r
/// when a reward vector is given (reward-shaped baseline only).
Vector proxy_q_target(
  const ParamSet & q1_target, const ParamSet & q2_target, const Matrix & next_obs,
  const Matrix & next_action, const Vector & next_log_prob, const Vector & terminal, double alpha,
  double gamma, const Vector * reward = nullptr);

/// How the conservative term is averaged: over the whole batch with the
/// intervention indicator as a mask, or over intervened samples only.
enum class ConservativeNormalization { kBatch, kIntervened };

struct ProxyQLoss
{
  double loss = 0.0;
  double td_loss = 0.0;
  double conservative = 0.0;  // before the weight
  double q_gap = 0.0;         // mean Q(s, a_h) - Q(s, a_n) over intervened samples
  Eigen::Index intervened = 0;
  ParamSet grad;
};

/// mean (y - Q(s, a_exec))^2 + beta * avg[I * (Q(s, a_n) - Q(s, a_h))] for one critic.
ProxyQLoss proxy_q_loss(
  const ParamSet & q, const Batch & batch, const Vector & y, double beta,
  ConservativeNormalization normalization = ConservativeNormalization::kBatch);

struct ValueLoss
{
  double loss = 0.0;
  Vector prediction;
  Vector target;
  ParamSet grad;
};

/// Squared error of Q_int(s, a_exec) against C + (1 - d) * gamma * Q_boot(s', a').
/// The target is held fixed.
ValueLoss qint_loss(
  const ParamSet & qint, const ParamSet & bootstrap, const Batch & batch,
  const Matrix & next_action, double gamma);

struct PolicyLoss
{
  double loss = 0.0;
  double mean_log_prob = 0.0;
  double mean_min_q = 0.0;
  double mean_qint = 0.0;
  Vector log_prob;
  ParamSet grad;
};

/// mean[alpha * log pi(a|s) - min_i Q_i(s, a) + Q_int(s, a)] with a drawn by
/// reparameterisation from `noise`. Gradients are taken w.r.t. the policy only.
/// `qint` may be null.
PolicyLoss policy_loss(
  const ParamSet & policy, const Matrix & obs, const Matrix & noise, const ParamSet & q1,
  const ParamSet & q2, const ParamSet * qint, double alpha);

/// mean[-alpha * (log pi + target_entropy)] and its derivative w.r.t. log alpha.
double alpha_loss(double log_alpha, const Vector & log_prob, double target_entropy);
double alpha_gradient(double log_alpha, const Vector & log_prob, double target_entropy);

struct BcLoss
{
  double loss = 0.0;
  ParamSet grad;
};

/// Negative mean log-likelihood of `actions` under the policy.
BcLoss behavior_cloning_loss(const ParamSet & policy, const Matrix & obs, const Matrix & actions);

}  // namespace haco::learner

#endif  // HACO__LEARNER__LOSSES_HPP_
