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

#ifndef HACO__NUMERIC__SQUASHED_GAUSSIAN_HPP_
#define HACO__NUMERIC__SQUASHED_GAUSSIAN_HPP_

#include "haco/numeric/mlp.hpp"

namespace haco::numeric
{

struct SquashedGaussianConfig
{
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double squash_epsilon = 1e-6;  // keeps log(1 - tanh^2 + eps) finite
};

/// One draw from tanh(N(mean, exp(log_std)^2)).
struct PolicyOutput
{
  Vector action;   // strictly inside (-1, 1)^d
  double log_prob = 0.0;
  Vector mean;     // pre-squash
  Vector log_std;  // after clamping
};

PolicyOutput sample_squashed_gaussian(
  const Vector & mean, const Vector & log_std, const Vector & noise,
  const SquashedGaussianConfig & cfg = {});

/// Batched reparameterised sample from a policy head whose rows are
/// [mean (d); raw log-std (d)]. Columns are samples.
struct PolicySample
{
  Matrix action;
  Vector log_prob;
  Matrix mean;
  Matrix log_std;      // clamped
  Matrix raw_log_std;  // as produced by the network
  Matrix noise;
};

PolicySample sample_policy_head(
  const Matrix & head_output, const Matrix & noise, const SquashedGaussianConfig & cfg = {});

/// dLoss/d(head_output) given dLoss/d(action) (d x B) and dLoss/d(log_prob) (B).
/// Noise is held fixed (reparameterisation); clamped log-std entries get zero gradient.
Matrix policy_head_backward(
  const PolicySample & sample, const Matrix & action_grad, const Vector & log_prob_grad,
  const SquashedGaussianConfig & cfg = {});

/// Log-density of given actions under the head's squashed Gaussian, used for
/// maximum-likelihood fitting. Actions are clipped to (-1 + 1e-6, 1 - 1e-6).
Vector squashed_gaussian_log_prob(
  const Matrix & head_output, const Matrix & action, const SquashedGaussianConfig & cfg = {});

/// dLogProb/d(head_output) for the actions above, scaled columnwise by `weight`.
Matrix squashed_gaussian_log_prob_backward(
  const Matrix & head_output, const Matrix & action, const Vector & weight,
  const SquashedGaussianConfig & cfg = {});

/// tanh(mean): the deterministic action used for evaluation.
Matrix deterministic_action(const Matrix & head_output);

}  // namespace haco::numeric

#endif  // HACO__NUMERIC__SQUASHED_GAUSSIAN_HPP_
