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

#include "haco/theory/risk.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

namespace haco::theory
{

double risk_bound(const BoundInputs & b)
{
  if (!(b.gamma >= 0.0 && b.gamma < 1.0)) {
    throw std::invalid_argument("risk_bound: gamma must lie in [0, 1)");
  }
  if (!(b.epsilon >= 0.0 && b.epsilon <= 1.0) || !(b.kappa >= 0.0 && b.kappa <= 1.0)) {
    throw std::invalid_argument("risk_bound: epsilon and kappa must lie in [0, 1]");
  }
  if (!(b.k_prime >= 0.0) || !std::isfinite(b.k_prime)) {
    throw std::invalid_argument("risk_bound: K' must be finite and >= 0");
  }
  const double h = 1.0 - b.gamma;
  return (b.epsilon + b.kappa + b.gamma * b.epsilon * b.epsilon / h * b.k_prime) / h;
}

AgentPolicy uniform_agent(std::uint64_t seed)
{
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const env::Observation &, const env::EgoState &) {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double steer = uniform(*rng);
    const double throttle = uniform(*rng);
    return env::Action(steer, throttle);
  };
}

FailureEstimate empirical_discounted_failure(
  const AgentPolicy & policy, guardian::Guardian & guardian, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const env::MapSpec>> maps, double gamma, int n_episodes,
  std::vector<guardian::SampledState> * visited)
{
  if (n_episodes < 1) {
    throw std::invalid_argument("empirical_discounted_failure: n_episodes must be >= 1");
  }
  if (maps.empty()) {
    throw std::invalid_argument("empirical_discounted_failure: no maps");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("empirical_discounted_failure: gamma must lie in [0, 1)");
  }
  env::DrivingEnv env(env_cfg);
  FailureEstimate est;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    const auto & map = maps[static_cast<std::size_t>(ep) % maps.size()];
    env::Observation obs = env.reset(map);
    guardian.reset_episode();
    double value = 0.0;
    double discount = 1.0;
    while (env.active()) {
      if (visited) {
        visited->push_back({env.sim_state(), map});
      }
      const auto step = guardian::guarded_step(policy(obs, env.ego()), guardian, env);
      ++est.steps;
      if (step.result.env_cost > 0 || step.result.out_of_road) {
        value += discount;
        ++est.failures;
      }
      discount *= gamma;
      obs = step.result.observation;
    }
    sum += value;
    sum_sq += value * value;
  }
  const double n = n_episodes;
  est.episodes = n_episodes;
  est.mean = sum / n;
  if (n_episodes > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.half_width = 1.96 * std::sqrt(var / n);
  }
  return est;
}

std::vector<guardian::SampledState> hazard_states(
  std::span<const guardian::SampledState> states, const env::EnvConfig & env_cfg)
{
  std::vector<guardian::SampledState> out;
  for (const auto & s : states) {
    bool hazard = false;
    for (int i = 0; i < 5 && !hazard; ++i) {
      for (int j = 0; j < 5 && !hazard; ++j) {
        const env::Action a(-1.0 + 0.5 * i, -1.0 + 0.5 * j);
        hazard = guardian::step_is_unsafe(s.state, a, *s.map, env_cfg);
      }
    }
    if (hazard) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<RiskReport> verify_bound(
  const guardian::Guardian & base, const env::EnvConfig & env_cfg,
  std::span<const std::shared_ptr<const env::MapSpec>> maps,
  std::span<const guardian::NoiseConfig> configs, const VerifyConfig & cfg)
{
  if (cfg.state_stride < 1) {
    throw std::invalid_argument("verify_bound: state_stride must be >= 1");
  }
  std::vector<RiskReport> reports;
  for (const auto & noise : configs) {
    auto g = guardian::apply_noise(base.clone(), noise);
    const auto probe = g->clone();

    std::vector<guardian::SampledState> visited;
    const auto failure = empirical_discounted_failure(
      uniform_agent(cfg.agent_seed), *g, env_cfg, maps, cfg.gamma, cfg.n_episodes, &visited);

    std::vector<guardian::SampledState> sample;
    for (std::size_t i = 0; i < visited.size(); i += static_cast<std::size_t>(cfg.state_stride)) {
      sample.push_back(visited[i]);
    }
    for (auto & s : hazard_states(visited, env_cfg)) {
      sample.push_back(std::move(s));
    }

    RiskReport r;
    r.noise = noise;
    r.tolerance = guardian::estimate_tolerance_on(
      *probe, env_cfg, sample, cfg.n_actions, cfg.n_expert_samples, cfg.tolerance_seed);
    r.bound = risk_bound(
      {r.tolerance.epsilon_hat, r.tolerance.kappa_hat, r.tolerance.k_prime_hat, cfg.gamma});
    r.v_hat = failure.mean;
    r.half_width = failure.half_width;
    r.episodes = failure.episodes;
    r.failures = failure.failures;
    r.pass = r.v_hat + r.half_width <= r.bound;
    r.within_interval = r.v_hat - r.half_width <= r.bound;
    reports.push_back(r);
  }
  return reports;
}

void write_risk_csv_header(std::ostream & out)
{
  out << "epsilon,kappa_lapse,epsilon_hat,kappa_hat,k_prime_hat,bound,v_hat,half_width,episodes,"
         "failures,pass,within_interval\n";
}

void write_risk_csv_row(std::ostream & out, const RiskReport & r)
{
  const auto old = out.precision(17);
  out << r.noise.epsilon << ',' << r.noise.kappa_lapse << ',' << r.tolerance.epsilon_hat << ','
      << r.tolerance.kappa_hat << ',' << r.tolerance.k_prime_hat << ',' << r.bound << ','
      << r.v_hat << ',' << r.half_width << ',' << r.episodes << ',' << r.failures << ','
      << (r.pass ? 1 : 0) << ',' << (r.within_interval ? 1 : 0) << '\n';
  out.precision(old);
}

}  // namespace haco::theory
