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
#include "haco/guardian/tolerance.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

namespace haco::guardian
{
namespace
{

using test::obstacle_at;
using test::straight_map;

EgoState cruising(double x, double lateral, double speed)
{
  EgoState s;
  s.x = x;
  s.y = lateral;
  s.speed = speed;
  return s;
}

}  // namespace

TEST_CASE("expert: drives generated maps without incident")
{
  env::EnvConfig env_cfg;
  GuardianConfig cfg;
  int completed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    completed += expert_completes(env::generate_map(seed, {}), env_cfg, cfg) ? 1 : 0;
  }
  CHECK_GE(completed, 16);
}

TEST_CASE("expert: feasibility check only admits maps the expert finishes")
{
  env::EnvConfig env_cfg;
  GuardianConfig cfg;
  const auto check = expert_feasibility(env_cfg, cfg);
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    CHECK(expert_completes(env::generate_map(seed, {}, check), env_cfg, cfg));
  }
}

TEST_CASE("expert: actions stay in range")
{
  env::EnvConfig env_cfg;
  const auto map = env::generate_map(3, {});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    EgoState s;
    const double arc = (u(rng) + 1.0) * 0.5 * map.length();
    const auto p = map.point_at(arc, 3.0 * u(rng));
    s.x = p.x();
    s.y = p.y();
    s.heading = map.heading_at(arc) + 0.5 * u(rng);
    s.speed = 5.0 + 5.0 * u(rng);
    const Action a = expert_action(s, map, env_cfg, {});
    REQUIRE_LE(a.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST_CASE("expert: steering signs")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(200.0);
  CHECK_NEAR(expert_action(cruising(10.0, 0.0, 5.0), *map, env_cfg, {})(0), 0.0, 1e-12);
  // Left of the centerline is negative lateral; the correction steers right.
  CHECK_GT(expert_action(cruising(10.0, -1.5, 5.0), *map, env_cfg, {})(0), 0.0);
  CHECK_LT(expert_action(cruising(10.0, 1.5, 5.0), *map, env_cfg, {})(0), 0.0);
}

TEST_CASE("hazard: time to collision")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(200.0, {obstacle_at(50.0, 0.0, 1.0)});
  // 50 m ahead, contact radius 2, 5 m/s.
  CHECK_NEAR(time_to_collision(cruising(0.0, 0.0, 5.0), *map, env_cfg), 48.0 / 5.0, 1e-9);
  CHECK(std::isinf(time_to_collision(cruising(0.0, 3.0, 5.0), *map, env_cfg)));
  CHECK(std::isinf(time_to_collision(cruising(60.0, 0.0, 5.0), *map, env_cfg)));
  CHECK_EQ(time_to_collision(cruising(49.0, 0.0, 5.0), *map, env_cfg), 0.0);
}

TEST_CASE("hazard: intervention predicate")
{
  env::EnvConfig env_cfg;
  GuardianConfig cfg;
  const auto map = straight_map(200.0, {obstacle_at(50.0, 0.0, 1.0)});
  const Action straight(0.0, 0.0);
  CHECK_FALSE(should_intervene(cruising(0.0, 0.0, 5.0), straight, *map, env_cfg, cfg));
  // About 0.4 s from the obstacle.
  CHECK(should_intervene(cruising(46.0, 0.0, 5.0), straight, *map, env_cfg, cfg));
  // Hard turn toward the road edge.
  CHECK(should_intervene(cruising(0.0, 2.5, 8.0), Action(1.0, 1.0), *map, env_cfg, cfg));
  // Outside the lateral margin.
  CHECK(should_intervene(cruising(0.0, 0.9 * map->half_width(), 1.0), straight, *map, env_cfg, cfg));
  CHECK_FALSE(should_intervene(cruising(0.0, 0.0, 0.0), Action(1.0, 0.0), *map, env_cfg, cfg));
}

TEST_CASE("scripted: takeover hold")
{
  env::EnvConfig env_cfg;
  GuardianConfig cfg;
  cfg.min_takeover_duration = 3;
  ScriptedGuardian g(env_cfg, cfg);
  const auto map = straight_map(200.0, {obstacle_at(50.0, 0.0, 1.0)});
  const Action straight(0.0, 0.0);
  CHECK(g.decide(cruising(46.0, 0.0, 5.0), straight, *map).intervene);
  // Safe states, still held for two more steps.
  CHECK(g.decide(cruising(0.0, 0.0, 5.0), straight, *map).intervene);
  CHECK(g.decide(cruising(0.0, 0.0, 5.0), straight, *map).intervene);
  CHECK_FALSE(g.decide(cruising(0.0, 0.0, 5.0), straight, *map).intervene);
  g.decide(cruising(46.0, 0.0, 5.0), straight, *map);
  g.reset_episode();
  CHECK_FALSE(g.decide(cruising(0.0, 0.0, 5.0), straight, *map).intervene);
}

TEST_CASE("scripted: stall rule")
{
  env::EnvConfig env_cfg;
  GuardianConfig cfg;
  cfg.stall_steps = 3;
  ScriptedGuardian g(env_cfg, cfg);
  const auto map = straight_map(200.0);
  const EgoState stopped = cruising(0.0, 0.0, 0.0);
  const Action idle(0.0, 0.0);
  CHECK_FALSE(g.decide(stopped, idle, *map).intervene);
  CHECK_FALSE(g.decide(stopped, idle, *map).intervene);
  const auto d = g.decide(stopped, idle, *map);
  CHECK(d.intervene);
  CHECK_GT((*d.expert_action)(1), 0.0);
  // Accelerating agents are left alone.
  CHECK_FALSE(g.decide(stopped, Action(0.0, 0.5), *map).intervene);
  // Moving resets the count.
  CHECK_FALSE(g.decide(cruising(0.0, 0.0, 3.0), idle, *map).intervene);
  CHECK_FALSE(g.decide(stopped, idle, *map).intervene);
}

TEST_CASE("scripted: decision carries the expert action iff intervening")
{
  env::EnvConfig env_cfg;
  ScriptedGuardian g(env_cfg, {});
  const auto map = env::generate_map(5, {});
  env::DrivingEnv env(env_cfg);
  env.reset(std::make_shared<env::MapSpec>(map));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int interventions = 0;
  while (env.active()) {
    const auto step = guarded_step(Action(u(rng), u(rng)), g, env);
    REQUIRE_EQ(step.decision.intervene, step.decision.expert_action.has_value());
    interventions += step.decision.intervene ? 1 : 0;
  }
  CHECK_GT(interventions, 0);
}

TEST_CASE("constant guardian")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(100.0);
  ConstantGuardian always(true, env_cfg);
  ConstantGuardian never(false, env_cfg);
  const EgoState s = cruising(0.0, 0.0, 3.0);
  CHECK(always.decide(s, Action(1, 1), *map).intervene);
  CHECK_FALSE(never.decide(s, Action(1, 1), *map).intervene);
  CHECK(always.flags(s, Action::Zero(), *map));
}

TEST_CASE("noise: zero noise matches the base guardian")
{
  env::EnvConfig env_cfg;
  const auto map = env::generate_map(6, {});
  ScriptedGuardian base(env_cfg, {});
  auto noisy = apply_noise(base.clone(), {0.0, 0.0, 4});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    EgoState s;
    const double arc = (u(rng) + 1.0) * 0.5 * map.length();
    const auto p = map.point_at(arc, 3.0 * u(rng));
    s.x = p.x();
    s.y = p.y();
    s.heading = map.heading_at(arc);
    s.speed = 6.0;
    const Action a(u(rng), u(rng));
    const auto d0 = base.decide(s, a, map);
    const auto d1 = noisy->decide(s, a, map);
    REQUIRE_EQ(d0.intervene, d1.intervene);
    if (d0.intervene) {
      REQUIRE(d0.expert_action->isApprox(*d1.expert_action));
    }
  }
}

TEST_CASE("noise: full lapse never intervenes and full error randomizes")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(100.0);
  const EgoState s = cruising(0.0, 0.0, 3.0);
  auto lapsing = apply_noise(std::make_unique<ConstantGuardian>(true, env_cfg), {0.0, 1.0, 1});
  auto erring = apply_noise(std::make_unique<ConstantGuardian>(true, env_cfg), {1.0, 0.0, 1});
  const Action clean = ConstantGuardian(true, env_cfg).expert(s, *map);
  int differs = 0;
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(lapsing->decide(s, Action::Zero(), *map).intervene);
    const auto d = erring->decide(s, Action::Zero(), *map);
    REQUIRE(d.intervene);
    differs += d.expert_action->isApprox(clean) ? 0 : 1;
  }
  CHECK_EQ(differs, 100);
}

TEST_CASE("noise: clone reproduces the stream")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(100.0);
  const EgoState s = cruising(0.0, 0.0, 3.0);
  auto a = apply_noise(std::make_unique<ConstantGuardian>(true, env_cfg), {0.5, 0.5, 9});
  a->decide(s, Action::Zero(), *map);
  auto b = a->clone();
  for (int i = 0; i < 50; ++i) {
    const auto da = a->decide(s, Action::Zero(), *map);
    const auto db = b->decide(s, Action::Zero(), *map);
    REQUIRE_EQ(da.intervene, db.intervene);
    if (da.intervene) {
      REQUIRE_EQ(*da.expert_action, *db.expert_action);
    }
  }
}

TEST_CASE("noise: rejects bad probabilities")
{
  env::EnvConfig env_cfg;
  CHECK_THROWS_AS(
    apply_noise(std::make_unique<ConstantGuardian>(true, env_cfg), {1.5, 0.0, 0}),
    std::invalid_argument);
  CHECK_THROWS_AS(
    apply_noise(std::make_unique<ConstantGuardian>(true, env_cfg), {0.0, -0.1, 0}),
    std::invalid_argument);
}

TEST_CASE("mixture: behavior policy")
{
  const std::vector<double> agent{0.5, 0.3, 0.2};
  const std::vector<std::uint8_t> flagged{0, 1, 1};
  const std::vector<double> expert{0.9, 0.1, 0.0};
  const auto mix = mix_behavior_policy(agent, flagged, expert);
  CHECK_NEAR(mix.rejection_probability, 0.5, 1e-15);
  CHECK_NEAR(mix.behavior[0], 0.5 + 0.45, 1e-15);
  CHECK_NEAR(mix.behavior[1], 0.05, 1e-15);
  CHECK_NEAR(mix.behavior[2], 0.0, 1e-15);
}

TEST_CASE("mixture: sums to one for random distributions")
{
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> agent(6);
    std::vector<double> expert(6);
    std::vector<std::uint8_t> flagged(6);
    for (int i = 0; i < 6; ++i) {
      agent[i] = u(rng);
      expert[i] = u(rng);
      flagged[i] = u(rng) < 0.4 ? 1 : 0;
    }
    const double sa = std::accumulate(agent.begin(), agent.end(), 0.0);
    const double se = std::accumulate(expert.begin(), expert.end(), 0.0);
    for (int i = 0; i < 6; ++i) {
      agent[i] /= sa;
      expert[i] /= se;
    }
    const auto mix = mix_behavior_policy(agent, flagged, expert);
    CHECK_NEAR(std::accumulate(mix.behavior.begin(), mix.behavior.end(), 0.0), 1.0, 1e-12);
  }
  CHECK_THROWS_AS(
    mix_behavior_policy(std::vector<double>{1.0}, std::vector<std::uint8_t>{}, std::vector<double>{1.0}),
    std::invalid_argument);
}

TEST_CASE("tolerance: clean guardian")
{
  env::EnvConfig env_cfg;
  const std::vector<std::shared_ptr<const MapSpec>> maps{
    std::make_shared<MapSpec>(env::generate_map(1, {})),
    std::make_shared<MapSpec>(env::generate_map(2, {}))};
  ScriptedGuardian g(env_cfg, {});
  ToleranceConfig cfg;
  cfg.n_states = 40;
  cfg.n_actions = 32;
  cfg.n_expert_samples = 2;
  const auto est = estimate_tolerance(g, env_cfg, maps, cfg);
  CHECK_EQ(est.states, 40);
  CHECK_EQ(est.epsilon_hat, 0.0);
  CHECK_EQ(est.kappa_hat, 0.0);
  CHECK_GT(est.k_prime_hat, 0.0);
  CHECK_LE(est.k_prime_hat, kActionVolume);
}

TEST_CASE("tolerance: never intervening misses unsafe actions")
{
  env::EnvConfig env_cfg;
  const auto map = straight_map(200.0, {obstacle_at(50.0, 0.0, 1.0)});
  SampledState st;
  st.map = map;
  st.state.ego = cruising(47.5, 0.0, 8.0);
  st.state.in_contact.assign(1, 0);
  const std::vector<SampledState> states{st};
  ConstantGuardian never(false, env_cfg);
  const auto est = estimate_tolerance_on(never, env_cfg, states, 64, 4, 1);
  CHECK_GT(est.kappa_hat, 0.0);
  CHECK_EQ(est.k_prime_hat, kActionVolume);
  ConstantGuardian always(true, env_cfg);
  const auto est2 = estimate_tolerance_on(always, env_cfg, states, 64, 4, 1);
  CHECK_EQ(est2.kappa_hat, 0.0);
  CHECK_EQ(est2.k_prime_hat, 0.0);
}

}  // namespace haco::guardian
