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

#include "haco/harness/evaluation.hpp"

#include "haco/learner/losses.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace haco::harness
{

MapList make_maps(
  std::span<const std::uint64_t> seeds, const env::Difficulty & difficulty,
  const env::EnvConfig & env_cfg, const guardian::GuardianConfig & guardian_cfg)
{
  const auto check = guardian::expert_feasibility(env_cfg, guardian_cfg);
  MapList maps;
  maps.reserve(seeds.size());
  for (const auto seed : seeds) {
    maps.push_back(std::make_shared<env::MapSpec>(env::generate_map(seed, difficulty, check)));
  }
  return maps;
}

Controller policy_controller(const learner::ParamSet & policy)
{
  return [policy](const env::Observation & obs, const env::EgoState &, const env::MapSpec &) {
    return learner::mean_action(policy, obs);
  };
}

Controller expert_controller(const env::EnvConfig & env_cfg, const guardian::GuardianConfig & cfg)
{
  return [env_cfg, cfg](const env::Observation &, const env::EgoState & ego, const env::MapSpec & map) {
    return guardian::expert_action(ego, map, env_cfg, cfg);
  };
}

EvalResult evaluate(
  const Controller & controller, const env::EnvConfig & env_cfg, const MapList & maps,
  std::span<const std::uint64_t> map_seeds, int episodes_per_map)
{
  if (maps.size() != map_seeds.size()) {
    throw std::invalid_argument("evaluate: one seed per map is required");
  }
  if (episodes_per_map < 1) {
    throw std::invalid_argument("evaluate: episodes_per_map must be >= 1");
  }
  const std::uint64_t decisions_before = guardian::decisions_made();
  EvalResult result;
  env::DrivingEnv env(env_cfg);
  for (std::size_t m = 0; m < maps.size(); ++m) {
    for (int e = 0; e < episodes_per_map; ++e) {
      EvalRow row;
      row.map_seed = map_seeds[m];
      row.episode = e;
      env::Observation obs = env.reset(maps[m]);
      while (env.active()) {
        const auto r = env.step(controller(obs, env.ego(), *maps[m]));
        row.env_return += r.reward;
        row.safety_violations += r.env_cost + (r.out_of_road ? 1 : 0);
        row.success = row.success || r.success;
        ++row.steps;
        obs = r.observation;
      }
      result.rows.push_back(row);
    }
  }
  for (const auto & row : result.rows) {
    result.mean_return += row.env_return;
    result.mean_safety_violations += row.safety_violations;
    result.success_rate += row.success ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(result.rows.size());
  result.mean_return /= n;
  result.mean_safety_violations /= n;
  result.success_rate /= n;
  result.guardian_decisions = guardian::decisions_made() - decisions_before;
  return result;
}

void write_eval_csv_header(std::ostream & out)
{
  out << "env_step,map_seed,episode,return,cost,success,steps\n";
}

void write_eval_csv_rows(std::ostream & out, std::int64_t env_step, const EvalResult & result)
{
  const auto old = out.precision(17);
  for (const auto & row : result.rows) {
    out << env_step << ',' << row.map_seed << ',' << row.episode << ',' << row.env_return << ','
        << row.safety_violations << ',' << (row.success ? 1 : 0) << ',' << row.steps << '\n';
  }
  out.precision(old);
}

namespace
{

learner::Vector min_q(const learner::LearnerState & state, const learner::Matrix & obs, const learner::Matrix & actions)
{
  const learner::Matrix in = learner::critic_input(obs, actions);
  const learner::Vector q1 = numeric::forward(state.q1, in).row(0).transpose();
  const learner::Vector q2 = numeric::forward(state.q2, in).row(0).transpose();
  return q1.cwiseMin(q2);
}

}  // namespace

void export_q_heatmap(
  const learner::LearnerState & state, const env::MapSpec & map, const env::EnvConfig & env_cfg,
  int rows, int cols, double speed, std::ostream & out)
{
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("export_q_heatmap: grid must be at least 1x1");
  }
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const auto * line : {&map.left_boundary, &map.right_boundary}) {
    for (const auto & p : *line) {
      x0 = std::min(x0, p.x());
      y0 = std::min(y0, p.y());
      x1 = std::max(x1, p.x());
      y1 = std::max(y1, p.y());
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
  learner::Matrix obs(env::observation_dim(env_cfg), n);
  learner::Matrix xy(2, n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * cols + c;
      env::EgoState ego;
      ego.x = x0 + (c + 0.5) * (x1 - x0) / cols;
      ego.y = y0 + (r + 0.5) * (y1 - y0) / rows;
      ego.heading = env::project(map, ego.position()).heading;
      ego.speed = speed;
      obs.col(k) = env::observe(ego, map, env_cfg);
      xy.col(k) << ego.x, ego.y;
    }
  }
  const learner::Matrix head = numeric::forward(state.policy, obs);
  const learner::Matrix actions = numeric::deterministic_action(head);
  const learner::Vector q = min_q(state, obs, actions);
  out << "x,y,q_value,policy_steer,policy_throttle\n";
  const auto old = out.precision(10);
  for (Eigen::Index k = 0; k < n; ++k) {
    out << xy(0, k) << ',' << xy(1, k) << ',' << q(k) << ',' << actions(0, k) << ','
        << actions(1, k) << '\n';
  }
  out.precision(old);
}

std::vector<InterventionSample> collect_interventions(
  const learner::ParamSet & policy, const guardian::Guardian & guardian,
  const env::EnvConfig & env_cfg, const MapList & maps, std::size_t n, std::int64_t max_steps,
  std::uint64_t seed)
{
  if (maps.empty()) {
    throw std::invalid_argument("collect_interventions: no maps");
  }
  auto g = guardian.clone();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  env::DrivingEnv env(env_cfg);
  std::vector<InterventionSample> out;
  std::int64_t steps = 0;
  std::size_t episode = 0;
  while (out.size() < n && steps < max_steps) {
    const auto & map = maps[episode++ % maps.size()];
    env::Observation obs = env.reset(map);
    g->reset_episode();
    while (env.active() && out.size() < n && steps < max_steps) {
      learner::Vector noise(2);
      noise << normal(rng), normal(rng);
      const env::Action a_n = learner::sample_action(policy, obs, noise);
      const auto d = g->decide(env.ego(), a_n, *map);
      if (d.intervene) {
        out.push_back({obs, a_n, *d.expert_action});
      }
      const auto r = env.step(d.intervene ? *d.expert_action : a_n);
      obs = r.observation;
      ++steps;
    }
  }
  return out;
}

double mean_q_gap(const learner::LearnerState & state, std::span<const InterventionSample> samples)
{
  if (samples.empty()) {
    throw std::invalid_argument("mean_q_gap: no samples");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  learner::Matrix obs(samples.front().obs.size(), n);
  learner::Matrix a_n(2, n);
  learner::Matrix a_h(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto & s = samples[static_cast<std::size_t>(i)];
    obs.col(i) = s.obs;
    a_n.col(i) = s.agent_action;
    a_h.col(i) = s.expert_action;
  }
  return (min_q(state, obs, a_h) - min_q(state, obs, a_n)).mean();
}

}  // namespace haco::harness
