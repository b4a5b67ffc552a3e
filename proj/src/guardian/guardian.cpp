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

#include "haco/guardian/guardian.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace haco::guardian
{

using env::Projection;
using env::SimState;
using env::Vec2;

namespace
{

std::atomic<std::uint64_t> g_decisions{0};

SimState sim_state_from(const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg)
{
  SimState sim;
  sim.ego = state;
  sim.in_contact.resize(map.obstacles.size());
  for (std::size_t i = 0; i < map.obstacles.size(); ++i) {
    const auto & ob = map.obstacles[i];
    const double reach = ob.radius + env_cfg.car_radius;
    sim.in_contact[i] = (state.position() - ob.center).squaredNorm() < reach * reach ? 1 : 0;
  }
  return sim;
}

double pass_offset(const env::Obstacle & ob, double half_width, const env::EnvConfig & env_cfg,
                   const ExpertConfig & cfg)
{
  const double right_gap = half_width - (ob.lateral + ob.radius);
  const double left_gap = (ob.lateral - ob.radius) + half_width;
  double pass = right_gap >= left_gap ? 0.5 * (ob.lateral + ob.radius + half_width)
                                      : 0.5 * (ob.lateral - ob.radius - half_width);
  pass = std::clamp(pass, -cfg.pass_offset_limit, cfg.pass_offset_limit);
  const double needed = ob.radius + env_cfg.car_radius + 0.4;
  if (std::abs(pass - ob.lateral) < needed) {
    pass = right_gap >= left_gap ? ob.lateral + needed : ob.lateral - needed;
  }
  return pass;
}

double planned_lateral(
  const MapSpec & map, double s, const env::EnvConfig & env_cfg, const ExpertConfig & cfg)
{
  double lateral = 0.0;
  double best_weight = 0.0;
  for (const auto & ob : map.obstacles) {
    const double ds = s - ob.arc_position;
    double w = 0.0;
    if (ds < -cfg.avoid_before || ds > cfg.avoid_after) {
      w = 0.0;
    } else if (ds < -cfg.avoid_hold_before) {
      w = (ds + cfg.avoid_before) / (cfg.avoid_before - cfg.avoid_hold_before);
    } else if (ds <= cfg.avoid_hold_after) {
      w = 1.0;
    } else {
      w = (cfg.avoid_after - ds) / (cfg.avoid_after - cfg.avoid_hold_after);
    }
    if (w > best_weight) {
      best_weight = w;
      lateral = w * pass_offset(ob, map.half_width(), env_cfg, cfg);
    }
  }
  return lateral;
}

Action nominal_action(
  const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg,
  const ExpertConfig & cfg)
{
  const Projection proj = env::project(map, state.position());
  const double lookahead =
    std::clamp(cfg.lookahead_base + cfg.lookahead_gain * state.speed, cfg.lookahead_base,
               cfg.lookahead_max);
  const double s_target = proj.arc + lookahead;
  const Vec2 target = map.point_at(s_target, planned_lateral(map, s_target, env_cfg, cfg));
  const Vec2 rel = target - state.position();
  const double distance = std::max(rel.norm(), 1e-3);
  const double alpha = env::wrap_angle(std::atan2(rel.y(), rel.x()) - state.heading);
  const double delta = std::atan2(2.0 * env_cfg.wheelbase * std::sin(alpha), distance);
  const double steering = std::clamp(delta / env_cfg.max_steer, -1.0, 1.0);

  const double turn = std::abs(env::wrap_angle(map.heading_at(proj.arc + 15.0) - proj.heading));
  double v_target = cfg.cruise_speed;
  if (turn > 1e-6) {
    const double curvature = turn / 15.0;
    v_target = std::min(v_target, std::sqrt(3.0 / curvature));
  }
  const double heading_error = std::abs(env::wrap_angle(state.heading - proj.heading));
  v_target *= std::max(0.4, std::cos(heading_error));
  const double throttle = std::clamp(cfg.speed_gain * (v_target - state.speed), -1.0, 1.0);
  return Action(steering, throttle);
}

// Steps survived (up to horizon) before out-of-road or a new contact when the
// command comes from `policy` each step.
template <class Policy>
int survival_steps(
  const SimState & start, const MapSpec & map, const env::EnvConfig & env_cfg, int horizon,
  Policy && policy)
{
  SimState sim = start;
  for (int k = 0; k < horizon; ++k) {
    const auto out = env::simulate_step(sim, policy(sim.ego), map, env_cfg);
    if (out.out_of_road || out.new_contacts > 0) {
      return k;
    }
    sim = out.next;
  }
  return horizon;
}

}  // namespace

std::uint64_t decisions_made() { return g_decisions.load(); }

Action expert_action(
  const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg,
  const GuardianConfig & cfg)
{
  const Action nominal = nominal_action(state, map, env_cfg, cfg.expert);
  if (!cfg.expert.safety_fallback) {
    return nominal;
  }
  const int horizon = std::max(1, cfg.horizon_steps);
  const SimState start = sim_state_from(state, map, env_cfg);
  auto closed_loop = [&](const EgoState & s) {
    return nominal_action(s, map, env_cfg, cfg.expert);
  };
  if (survival_steps(start, map, env_cfg, horizon, closed_loop) == horizon) {
    return nominal;
  }
  Action best = nominal;
  int best_survival = -1;
  double best_distance = std::numeric_limits<double>::infinity();
  for (const double steer : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    for (const double throttle : {nominal(1), 0.0, -1.0}) {
      const Action candidate(steer, throttle);
      const int survival = survival_steps(
        start, map, env_cfg, horizon, [&](const EgoState &) { return candidate; });
      const double distance = (candidate - nominal).squaredNorm();
      if (survival > best_survival || (survival == best_survival && distance < best_distance)) {
        best = candidate;
        best_survival = survival;
        best_distance = distance;
      }
    }
  }
  return best;
}

double time_to_collision(const EgoState & state, const MapSpec & map, const env::EnvConfig & env_cfg)
{
  const Vec2 o = state.position();
  const Vec2 dir(std::cos(state.heading), std::sin(state.heading));
  double best = std::numeric_limits<double>::infinity();
  for (const auto & ob : map.obstacles) {
    const double r = ob.radius + env_cfg.car_radius;
    const Vec2 m = o - ob.center;
    const double c = m.squaredNorm() - r * r;
    if (c <= 0.0) {
      return 0.0;
    }
    const double b = m.dot(dir);
    const double disc = b * b - c;
    if (b > 0.0 || disc < 0.0) {
      continue;
    }
    best = std::min(best, -b - std::sqrt(disc));
  }
  if (!std::isfinite(best)) {
    return best;
  }
  return state.speed > 1e-9 ? best / state.speed : std::numeric_limits<double>::infinity();
}

bool should_intervene(
  const EgoState & state, const Action & agent_action, const MapSpec & map,
  const env::EnvConfig & env_cfg, const GuardianConfig & cfg)
{
  const Projection proj = env::project(map, state.position());
  if (proj.distance > cfg.lateral_margin * map.half_width()) {
    return true;
  }
  if (time_to_collision(state, map, env_cfg) < cfg.ttc_threshold) {
    return true;
  }
  SimState sim = sim_state_from(state, map, env_cfg);
  for (int k = 0; k < cfg.horizon_steps; ++k) {
    const auto out = env::simulate_step(sim, agent_action, map, env_cfg);
    if (out.out_of_road || out.any_contact) {
      return true;
    }
    sim = out.next;
  }
  return false;
}

ScriptedGuardian::ScriptedGuardian(env::EnvConfig env_cfg, GuardianConfig cfg)
: env_cfg_(env_cfg), cfg_(cfg)
{
  if (cfg_.horizon_steps < 0 || cfg_.min_takeover_duration < 1) {
    throw std::invalid_argument("guardian: horizon must be >= 0 and takeover duration >= 1");
  }
}

void ScriptedGuardian::reset_episode()
{
  hold_remaining_ = 0;
  slow_steps_ = 0;
}

bool ScriptedGuardian::flags(const EgoState & state, const Action & agent_action, const MapSpec & map)
{
  return should_intervene(state, agent_action, map, env_cfg_, cfg_);
}

Action ScriptedGuardian::expert(const EgoState & state, const MapSpec & map)
{
  return expert_action(state, map, env_cfg_, cfg_);
}

GuardianDecision ScriptedGuardian::decide(
  const EgoState & state, const Action & agent_action, const MapSpec & map)
{
  ++g_decisions;
  if (cfg_.stall_steps > 0) {
    slow_steps_ = state.speed < cfg_.stall_speed ? slow_steps_ + 1 : 0;
  }
  if (hold_remaining_ > 0) {
    --hold_remaining_;
    return {true, expert(state, map)};
  }
  const bool stalled = cfg_.stall_steps > 0 && slow_steps_ >= cfg_.stall_steps &&
                       agent_action(1) <= cfg_.stall_throttle;
  if (stalled || flags(state, agent_action, map)) {
    hold_remaining_ = cfg_.min_takeover_duration - 1;
    return {true, expert(state, map)};
  }
  return {false, std::nullopt};
}

std::unique_ptr<Guardian> ScriptedGuardian::clone() const
{
  return std::make_unique<ScriptedGuardian>(*this);
}

ConstantGuardian::ConstantGuardian(bool always, env::EnvConfig env_cfg, GuardianConfig cfg)
: always_(always), env_cfg_(env_cfg), cfg_(cfg)
{
}

bool ConstantGuardian::flags(const EgoState &, const Action &, const MapSpec &) { return always_; }

Action ConstantGuardian::expert(const EgoState & state, const MapSpec & map)
{
  return expert_action(state, map, env_cfg_, cfg_);
}

GuardianDecision ConstantGuardian::decide(
  const EgoState & state, const Action &, const MapSpec & map)
{
  ++g_decisions;
  if (!always_) {
    return {false, std::nullopt};
  }
  return {true, expert(state, map)};
}

std::unique_ptr<Guardian> ConstantGuardian::clone() const
{
  return std::make_unique<ConstantGuardian>(*this);
}

NoisyGuardian::NoisyGuardian(std::unique_ptr<Guardian> base, NoiseConfig cfg)
: base_(std::move(base)), cfg_(cfg), rng_(cfg.seed)
{
  if (!base_) {
    throw std::invalid_argument("NoisyGuardian: base guardian is null");
  }
  if (
    !(cfg_.epsilon >= 0.0 && cfg_.epsilon <= 1.0) ||
    !(cfg_.kappa_lapse >= 0.0 && cfg_.kappa_lapse <= 1.0)) {
    throw std::invalid_argument("NoisyGuardian: probabilities must lie in [0, 1]");
  }
}

void NoisyGuardian::reset_episode() { base_->reset_episode(); }

bool NoisyGuardian::lapse()
{
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.kappa_lapse;
}

bool NoisyGuardian::flags(const EgoState & state, const Action & agent_action, const MapSpec & map)
{
  return base_->flags(state, agent_action, map) && !lapse();
}

Action NoisyGuardian::expert(const EgoState & state, const MapSpec & map)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) < cfg_.epsilon) {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double steer = uniform(rng_);
    const double throttle = uniform(rng_);
    return Action(steer, throttle);
  }
  return base_->expert(state, map);
}

GuardianDecision NoisyGuardian::decide(
  const EgoState & state, const Action & agent_action, const MapSpec & map)
{
  GuardianDecision d = base_->decide(state, agent_action, map);
  if (!d.intervene) {
    return d;
  }
  if (lapse()) {
    return {false, std::nullopt};
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) < cfg_.epsilon) {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double steer = uniform(rng_);
    const double throttle = uniform(rng_);
    d.expert_action = Action(steer, throttle);
  }
  return d;
}

std::unique_ptr<Guardian> NoisyGuardian::clone() const
{
  auto copy = std::make_unique<NoisyGuardian>(base_->clone(), cfg_);
  copy->rng_ = rng_;
  return copy;
}

std::unique_ptr<Guardian> apply_noise(std::unique_ptr<Guardian> guardian, const NoiseConfig & cfg)
{
  return std::make_unique<NoisyGuardian>(std::move(guardian), cfg);
}

bool expert_completes(const MapSpec & map, const env::EnvConfig & env_cfg, const GuardianConfig & cfg)
{
  env::DrivingEnv env(env_cfg);
  env.reset(std::make_shared<MapSpec>(map));
  while (env.active()) {
    const auto r = env.step(expert_action(env.ego(), map, env_cfg, cfg));
    if (r.env_cost > 0 || r.out_of_road) {
      return false;
    }
    if (r.success) {
      return true;
    }
  }
  return false;
}

env::FeasibilityCheck expert_feasibility(const env::EnvConfig & env_cfg, const GuardianConfig & cfg)
{
  return [env_cfg, cfg](const MapSpec & map) { return expert_completes(map, env_cfg, cfg); };
}

GuardedStep guarded_step(const Action & agent_action, Guardian & guardian, env::DrivingEnv & env)
{
  GuardedStep out;
  out.decision = guardian.decide(env.ego(), agent_action, env.map());
  out.applied = out.decision.intervene ? *out.decision.expert_action : agent_action;
  out.result = env.step(out.applied);
  return out;
}

DiscreteMixture mix_behavior_policy(
  std::span<const double> agent, std::span<const std::uint8_t> intervene,
  std::span<const double> expert)
{
  if (agent.size() != intervene.size() || agent.size() != expert.size()) {
    throw std::invalid_argument("mix_behavior_policy: inputs must have equal length");
  }
  DiscreteMixture out;
  for (std::size_t i = 0; i < agent.size(); ++i) {
    if (intervene[i]) {
      out.rejection_probability += agent[i];
    }
  }
  out.behavior.resize(agent.size());
  for (std::size_t i = 0; i < agent.size(); ++i) {
    out.behavior[i] =
      agent[i] * (intervene[i] ? 0.0 : 1.0) + expert[i] * out.rejection_probability;
  }
  return out;
}

}  // namespace haco::guardian
