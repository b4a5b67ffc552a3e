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

#include "haco/harness/demonstrations.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <random>
#include <string>

namespace haco::harness
{

using nlohmann::json;

namespace
{

std::vector<double> to_vec(const Eigen::VectorXd & v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const json & j, std::size_t expected, const char * what)
{
  const auto v = j.get<std::vector<double>>();
  if (v.size() != expected) {
    throw DemoLogError(std::string("demonstration record: bad ") + what + " length");
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_demo_header(std::ostream & out, int obs_dim)
{
  out << json{{"v", kDemoLogVersion}, {"type", "demonstrations"}, {"obs_dim", obs_dim}}.dump()
      << '\n';
}

Demonstrations record_demonstrations(
  const guardian::Guardian & guardian, const env::EnvConfig & env_cfg, const MapList & maps,
  std::int64_t n_steps, std::ostream * out)
{
  if (n_steps < 0) {
    throw std::invalid_argument("record_demonstrations: n_steps must be >= 0");
  }
  if (n_steps > 0 && maps.empty()) {
    throw std::invalid_argument("record_demonstrations: no maps");
  }
  Demonstrations demos;
  demos.obs_dim = env::observation_dim(env_cfg);
  if (out) {
    write_demo_header(*out, demos.obs_dim);
  }
  auto g = guardian.clone();
  env::DrivingEnv env(env_cfg);
  std::size_t episode = 0;
  std::int64_t steps = 0;
  while (steps < n_steps) {
    const auto & map = maps[episode++ % maps.size()];
    env::Observation obs = env.reset(map);
    g->reset_episode();
    while (env.active() && steps < n_steps) {
      const env::Action a = g->expert(env.ego(), *map);
      if (out) {
        *out << json{{"map_seed", map->seed}, {"obs", to_vec(obs)}, {"action", to_vec(a)}}.dump()
             << '\n';
      }
      demos.obs.push_back(obs);
      demos.actions.push_back(a);
      obs = env.step(a).observation;
      ++steps;
    }
  }
  return demos;
}

Demonstrations read_demonstrations(std::istream & in)
{
  std::string line;
  if (!std::getline(in, line)) {
    throw DemoLogError("demonstration log: missing header");
  }
  Demonstrations demos;
  try {
    const json header = json::parse(line);
    if (header.at("type") != "demonstrations") {
      throw DemoLogError("demonstration log: wrong record type in header");
    }
    if (header.at("v").get<int>() != kDemoLogVersion) {
      throw DemoLogError("demonstration log: unsupported version");
    }
    demos.obs_dim = header.at("obs_dim").get<int>();
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      const json rec = json::parse(line);
      demos.obs.push_back(from_vec(rec.at("obs"), static_cast<std::size_t>(demos.obs_dim), "obs"));
      demos.actions.push_back(from_vec(rec.at("action"), learner::kActionDim, "action"));
    }
  } catch (const json::exception & e) {
    throw DemoLogError(std::string("demonstration log: ") + e.what());
  }
  return demos;
}

BcResult train_behavior_cloning(
  const Demonstrations & demos, const learner::TrainConfig & cfg, std::uint64_t seed,
  int gradient_steps)
{
  if (demos.size() == 0) {
    throw std::invalid_argument("train_behavior_cloning: no demonstrations");
  }
  BcResult r{learner::make_learner(demos.obs_dim, cfg, seed), 0.0};
  auto & st = r.state;
  const auto n = static_cast<Eigen::Index>(std::min<std::size_t>(demos.size(), cfg.batch_size));
  std::uniform_int_distribution<std::size_t> pick(0, demos.size() - 1);
  learner::Matrix obs(demos.obs_dim, n);
  learner::Matrix act(learner::kActionDim, n);
  for (int step = 0; step < gradient_steps; ++step) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t k = pick(st.update_rng);
      obs.col(i) = demos.obs[k];
      act.col(i) = demos.actions[k];
    }
    const auto loss = learner::behavior_cloning_loss(st.policy, obs, act);
    numeric::adam_step(st.policy, loss.grad, st.policy_opt, cfg.learning_rate);
    r.final_loss = loss.loss;
    ++st.gradient_steps;
  }
  return r;
}

}  // namespace haco::harness
