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

#ifndef HACO__THEORY__RISK_HPP_
#define HACO__THEORY__RISK_HPP_

#include "haco/guardian/guardian.hpp"
#include "haco/guardian/tolerance.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace haco::theory
{

struct BoundInputs
{
  double epsilon = 0.0;
  double kappa = 0.0;
  double k_prime = 0.0;
  double gamma = 0.99;
};

/// Upper bound on the discounted failure of the guarded behavior policy:
/// (eps + kappa + gamma * eps^2 * K' / (1 - gamma)) / (1 - gamma).
/// Throws std::invalid_argument for gamma outside [0, 1) or out-of-range inputs.
double risk_bound(const BoundInputs & b);

/// Agent side of the mixed behavior policy.
using AgentPolicy = std::function<env::Action(const env::Observation &, const env::EgoState &)>;

/// Uniform actions on [-1, 1]^2 from a stream seeded by `seed`.
AgentPolicy uniform_agent(std::uint64_t seed);

struct FailureEstimate
{
  double mean = 0.0;
  double half_width = 0.0;  // 95% normal approximation
  int episodes = 0;
  std::int64_t failures = 0;  // unsafe steps over all episodes
  std::int64_t steps = 0;
};

/// Monte Carlo estimate of sum_t gamma^t 1[step t entered an unsafe state]
/// under agent + guardian. Episodes cycle through `maps`. When `visited` is
/// non-null every pre-step state is appended to it.
FailureEstimate empirical_discounted_failure(
  const AgentPolicy & policy, guardian::Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const env::MapSpec>> maps, double gamma, int n_episodes,
  std::vector<guardian::SampledState> * visited = nullptr);

struct RiskReport
{
  guardian::NoiseConfig noise;
  guardian::ToleranceEstimate tolerance;
  double bound = 0.0;
  double v_hat = 0.0;
  double half_width = 0.0;
  int episodes = 0;
  std::int64_t failures = 0;
  bool pass = false;            // v_hat + half_width <= bound
  bool within_interval = false; // v_hat - half_width <= bound
};

struct VerifyConfig
{
  double gamma = 0.99;
  int n_episodes = 200;
  int n_actions = 64;
  int n_expert_samples = 8;
  int state_stride = 5;
  std::uint64_t agent_seed = 11;
  std::uint64_t tolerance_seed = 13;
};

/// States among `states` where some action on a 5x5 grid over [-1, 1]^2 is
/// unsafe in one step.
std::vector<guardian::SampledState> hazard_states(
  std::span<const guardian::SampledState> states, const env::EnvConfig & env_cfg);

/// For each noise config: wrap `base`, roll out a uniform agent under it to
/// measure V_hat, estimate (eps, kappa, K') on the visited states (every
/// `state_stride`-th state plus all hazard states) and compare with the bound.
std::vector<RiskReport> verify_bound(
  const guardian::Guardian & base, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const env::MapSpec>> maps,
  std::span<const guardian::NoiseConfig> configs, const VerifyConfig & cfg);

void write_risk_csv_header(std::ostream & out);
void write_risk_csv_row(std::ostream & out, const RiskReport & report);

}  // namespace haco::theory

#endif  // HACO__THEORY__RISK_HPP_
