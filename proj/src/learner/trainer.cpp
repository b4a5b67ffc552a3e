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

#include "haco/learner/trainer.hpp"

#include <algorithm>
#include <stdexcept>

namespace haco::learner
{

namespace
{

std::mt19937_64 action_stream(std::uint64_t seed)
{
  std::seed_seq stream{seed & 0xffffffffU, seed >> 32, std::uint64_t{0x61637473}};
  return std::mt19937_64(stream);
}

}  // namespace

Trainer::Trainer(
  env::EnvConfig env_cfg, TrainConfig cfg, std::vector<std::shared_ptr<const env::MapSpec>> maps,
  std::uint64_t seed, TrainerOptions options)
: env_cfg_(env_cfg),
  cfg_(std::move(cfg)),
  options_(options),
  maps_(std::move(maps)),
  env_(env_cfg_),
  learner_(make_learner(env::observation_dim(env_cfg_), cfg_, seed)),
  buffer_(env::observation_dim(env_cfg_), cfg_.buffer_capacity),
  action_rng_(action_stream(seed))
{
  if (maps_.empty()) {
    throw std::invalid_argument("Trainer: no training maps");
  }
  if (options_.reward_channel == RewardChannel::kShaped) {
    rewards_.assign(cfg_.buffer_capacity, 0.0);
  }
  begin_episode();
}

void Trainer::begin_episode()
{
  obs_ = env_.reset(maps_[static_cast<std::size_t>(episode_) % maps_.size()]);
  episode_steps_ = 0;
  episode_takeovers_ = 0;
  episode_violations_ = 0;
  episode_cost_ = 0.0;
  episode_return_ = 0.0;
  prev_intervened_ = false;
}

std::span<const double> Trainer::rewards() const { return rewards_; }

Action Trainer::propose()
{
  std::normal_distribution<double> normal;
  Vector noise(kActionDim);
  for (Eigen::Index i = 0; i < kActionDim; ++i) {
    noise(i) = normal(action_rng_);
  }
  return sample_action(learner_.policy, obs_, noise);
}

TickRecord Trainer::commit(const Action & agent_action, const guardian::GuardianDecision & decision)
{
  if (decision.intervene != decision.expert_action.has_value()) {
    throw std::invalid_argument("commit: expert action must be present iff intervening");
  }
  TickRecord rec;
  rec.agent_action = agent_action.cwiseMax(-1.0).cwiseMin(1.0);
  rec.decision = decision;
  if (decision.intervene) {
    rec.decision.expert_action = Action(decision.expert_action->cwiseMax(-1.0).cwiseMin(1.0));
  }
  rec.applied = decision.intervene ? *rec.decision.expert_action : rec.agent_action;

  if (decision.intervene) {
    double raw = 1.0;
    if (cfg_.cost_mode == CostMode::kCosine) {
      const CostResult c = intervention_cost(rec.agent_action, *rec.decision.expert_action);
      raw = c.value;
      rec.cost_degenerate = c.degenerate;
      degenerate_costs_ += c.degenerate ? 1 : 0;
    }
    rec.rising_cost = rising_edge_cost(true, prev_intervened_, raw);
  }

  rec.result = env_.step(rec.applied);
  if (options_.zero_reward) {
    rec.result.reward = 0.0;
  }

  Transition t;
  t.obs = obs_;
  t.agent_action = rec.agent_action;
  if (decision.intervene) {
    t.expert_action = rec.decision.expert_action;
  }
  t.intervened = decision.intervene;
  t.rising_cost = rec.rising_cost;
  t.next_obs = rec.result.observation;
  t.terminal = rec.result.terminal();
  rec.slot = buffer_.push(t);

  const int violations = rec.result.env_cost + (rec.result.out_of_road ? 1 : 0);
  if (options_.reward_channel == RewardChannel::kShaped) {
    rewards_[rec.slot] = options_.zero_reward
                           ? 0.0
                           : rec.result.reward - options_.safety_penalty * violations;
  }

  prev_intervened_ = decision.intervene;
  ++env_steps_;
  ++episode_steps_;
  episode_takeovers_ += decision.intervene ? 1 : 0;
  total_takeover_steps_ += decision.intervene ? 1 : 0;
  episode_cost_ += rec.rising_cost;
  episode_violations_ += violations;
  cumulative_violations_ += violations;
  episode_return_ += rec.result.reward;
  obs_ = rec.result.observation;

  if (env_steps_ % cfg_.steps_per_iteration == 0 &&
      buffer_.size() >= static_cast<std::size_t>(cfg_.learning_starts))
  {
    pending_updates_ += cfg_.gradient_steps_per_iteration;
  }

  if (rec.result.done()) {
    rec.episode_end = true;
    EpisodeMetrics m;
    m.env_step = env_steps_;
    m.episode = episode_;
    m.map_seed = env_.map().seed;
    m.steps = episode_steps_;
    m.takeover_steps = episode_takeovers_;
    m.takeover_rate = static_cast<double>(episode_takeovers_) / episode_steps_;
    m.intervention_cost = episode_cost_;
    m.safety_violations = episode_violations_;
    m.cumulative_safety_violations = cumulative_violations_;
    m.success = rec.result.success;
    m.out_of_road = rec.result.out_of_road;
    m.env_return = episode_return_;
    m.diagnostics = last_diag_;
    ++episode_;
    if (on_episode) {
      on_episode(m);
    }
    begin_episode();
  }
  return rec;
}

TickRecord Trainer::step(guardian::Guardian & guardian)
{
  if (at_episode_start()) {
    guardian.reset_episode();
  }
  const Action a = propose();
  const auto decision = guardian.decide(env_.ego(), a, env_.map());
  TickRecord rec = commit(a, decision);
  if (pending_updates_ > 0) {
    run_updates(pending_updates_);
  }
  return rec;
}

Diagnostics Trainer::run_updates(int max_steps)
{
  const int n = std::min(max_steps, pending_updates_);
  if (n <= 0) {
    return {};
  }
  Diagnostics d = train_steps(learner_, buffer_, rewards_, cfg_, n);
  pending_updates_ = d.aborted ? 0 : pending_updates_ - n;
  if (!d.warming_up) {
    last_diag_ = d;
  }
  return d;
}

void run_training(
  Trainer & trainer, guardian::Guardian & guardian, std::int64_t total_env_steps,
  const TrainingHooks & hooks)
{
  auto previous = trainer.on_episode;
  trainer.on_episode = hooks.on_episode;
  while (trainer.env_steps() < total_env_steps) {
    const std::int64_t before = trainer.learner().iterations;
    trainer.step(guardian);
    if (hooks.on_iteration && trainer.learner().iterations != before) {
      hooks.on_iteration(trainer.learner().iterations, trainer.last_diagnostics());
    }
  }
  trainer.on_episode = previous;
}

}  // namespace haco::learner
