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

#include "haco/guardian/tolerance.hpp"

#include <algorithm>
#include <ostream>
#include <random>
#include <stdexcept>

namespace haco::guardian
{

bool step_is_unsafe(
  const env::SimState & state, const Action & action, const MapSpec & map,
  const env::EnvConfig & env_cfg)
{
  const auto out = env::simulate_step(state, action, map, env_cfg);
  return out.out_of_road || out.new_contacts > 0;
}

std::vector<SampledState> sample_guarded_states(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const MapSpec>> maps, int n_states, int stride,
  std::uint64_t seed)
{
  if (maps.empty()) {
    throw std::invalid_argument("sample_guarded_states: no maps");
  }
  if (n_states < 1 || stride < 1) {
    throw std::invalid_argument("sample_guarded_states: n_states and stride must be >= 1");
  }
  auto g = guardian.clone();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  env::DrivingEnv env(env_cfg);
  std::vector<SampledState> out;
  out.reserve(static_cast<std::size_t>(n_states));
  std::size_t episode = 0;
  while (static_cast<int>(out.size()) < n_states) {
    auto map = maps[episode++ % maps.size()];
    env.reset(map);
    g->reset_episode();
    int t = 0;
    while (env.active() && static_cast<int>(out.size()) < n_states) {
      if (t++ % stride == 0) {
        out.push_back({env.sim_state(), map});
      }
      const double steer = uniform(rng);
      const double throttle = uniform(rng);
      guarded_step(Action(steer, throttle), *g, env);
    }
  }
  return out;
}

ToleranceEstimate estimate_tolerance_on(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const SampledState> states, int n_actions, int n_expert_samples,
  std::uint64_t seed)
{
  if (n_actions < 1 || n_expert_samples < 1) {
    throw std::invalid_argument("estimate_tolerance: sample counts must be >= 1");
  }
  auto g = guardian.clone();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  ToleranceEstimate est;
  for (const auto & sample : states) {
    const auto & map = *sample.map;
    const auto & ego = sample.state.ego;
    ++est.states;
    int expert_unsafe = 0;
    for (int i = 0; i < n_expert_samples; ++i) {
      if (step_is_unsafe(sample.state, g->expert(ego, map), map, env_cfg)) {
        ++expert_unsafe;
      }
    }
    int unflagged = 0;
    int missed = 0;
    for (int i = 0; i < n_actions; ++i) {
      const double steer = uniform(rng);
      const double throttle = uniform(rng);
      const Action a(steer, throttle);
      const bool flagged = g->flags(ego, a, map);
      unflagged += flagged ? 0 : 1;
      if (step_is_unsafe(sample.state, a, map, env_cfg)) {
        ++est.unsafe_actions;
        missed += flagged ? 0 : 1;
      }
    }
    est.expert_samples += n_expert_samples;
    est.action_samples += n_actions;
    est.unsafe_expert_actions += expert_unsafe;
    est.missed_unsafe_actions += missed;
    est.epsilon_hat =
      std::max(est.epsilon_hat, static_cast<double>(expert_unsafe) / n_expert_samples);
    est.kappa_hat = std::max(est.kappa_hat, static_cast<double>(missed) / n_actions);
    est.k_prime_hat =
      std::max(est.k_prime_hat, kActionVolume * static_cast<double>(unflagged) / n_actions);
  }
  if (est.expert_samples > 0) {
    est.epsilon_mean = static_cast<double>(est.unsafe_expert_actions) / est.expert_samples;
  }
  if (est.unsafe_actions > 0) {
    est.kappa_mean = static_cast<double>(est.missed_unsafe_actions) / est.unsafe_actions;
  }
  return est;
}

ToleranceEstimate estimate_tolerance(
  const Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const MapSpec>> maps, const ToleranceConfig & cfg)
{
  if (cfg.n_states < 1 || cfg.n_actions < 1) {
    throw std::invalid_argument("estimate_tolerance: n_states and n_actions must be >= 1");
  }
  const auto states =
    sample_guarded_states(guardian, env_cfg, maps, cfg.n_states, cfg.state_stride, cfg.seed);
  return estimate_tolerance_on(
    guardian, env_cfg, states, cfg.n_actions, cfg.n_expert_samples, cfg.seed + 1);
}

void write_tolerance_csv_header(std::ostream & out)
{
  out << "epsilon_hat,kappa_hat,k_prime_hat,epsilon_mean,kappa_mean,states,action_samples,"
         "expert_samples,unsafe_actions,missed_unsafe_actions,unsafe_expert_actions\n";
}

void write_tolerance_csv_row(std::ostream & out, const ToleranceEstimate & e)
{
  const auto old = out.precision(17);
  out << e.epsilon_hat << ',' << e.kappa_hat << ',' << e.k_prime_hat << ',' << e.epsilon_mean
      << ',' << e.kappa_mean << ',' << e.states << ',' << e.action_samples << ','
      << e.expert_samples << ',' << e.unsafe_actions << ',' << e.missed_unsafe_actions << ','
      << e.unsafe_expert_actions << '\n';
  out.precision(old);
}

}  // namespace haco::guardian
