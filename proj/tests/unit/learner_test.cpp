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

#include "haco/learner/learner.hpp"
#include "haco/learner/losses.hpp"
#include "haco/learner/replay_buffer.hpp"
#include "haco/learner/trainer.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

namespace haco::learner
{
namespace
{

using numeric::Activation;
using test::random_batch;
using test::random_net;
using test::relative_error;

constexpr Eigen::Index kObs = 5;

// Network whose output is `value` everywhere.
ParamSet constant_net(Eigen::Index in, double value)
{
  ParamSet p;
  p.layers.push_back({Matrix::Zero(1, in), Vector::Constant(1, value)});
  return p;
}

Matrix normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 & rng)
{
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = n(rng);
  }
  return m;
}

double max_gradient_error_proxy(std::uint64_t seed, ConservativeNormalization norm)
{
  std::mt19937_64 rng(seed);
  const auto q = random_net({kObs + 2, 6, 1}, Activation::kTanh, seed);
  const Batch b = random_batch(kObs, 7, rng);
  const Vector y = normal_matrix(7, 1, rng).col(0);
  const auto res = proxy_q_loss(q, b, y, 10.0, norm);
  const auto fd = test::numeric_gradient(
    q, [&](const ParamSet & p) { return proxy_q_loss(p, b, y, 10.0, norm).loss; });
  return relative_error(numeric::flatten(res.grad), fd);
}

}  // namespace

TEST_CASE("cost: cosine values")
{
  CHECK_NEAR(intervention_cost(Action(0.3, -0.2), Action(0.3, -0.2)).value, 0.0, 1e-12);
  CHECK_NEAR(intervention_cost(Action(1, 0), Action(-1, 0)).value, 2.0, 1e-12);
  CHECK_NEAR(intervention_cost(Action(1, 0), Action(0, 1)).value, 1.0, 1e-12);
  CHECK_NEAR(intervention_cost(Action(0.6, 0.8), Action(1, 0)).value, 0.4, 1e-12);
  CHECK_NEAR(intervention_cost(Action(2, 0), Action(0.1, 0)).value, 0.0, 1e-12);
}

TEST_CASE("cost: zero length action is degenerate")
{
  const auto c = intervention_cost(Action::Zero(), Action(1, 0));
  CHECK(c.degenerate);
  CHECK_EQ(c.value, 1.0);
  CHECK_FALSE(intervention_cost(Action(1e-3, 0), Action(1, 0)).degenerate);
}

TEST_CASE("cost: stays in range for random actions")
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double c = intervention_cost(Action(u(rng), u(rng)), Action(u(rng), u(rng))).value;
    REQUIRE_GE(c, 0.0);
    REQUIRE_LE(c, 2.0);
  }
}

TEST_CASE("cost: rising edge charges only the first takeover step")
{
  std::mt19937_64 rng(5);
  std::bernoulli_distribution flip(0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    bool prev = false;
    bool on = false;
    for (int t = 0; t < 50; ++t) {
      if (flip(rng)) {
        on = !on;
      }
      const double c = rising_edge_cost(on, prev, 0.7);
      REQUIRE_EQ(c, (on && !prev) ? 0.7 : 0.0);
      prev = on;
    }
  }
}

TEST_CASE("targets: proxy target by hand")
{
  const auto q1t = constant_net(kObs + 2, 1.5);
  const auto q2t = constant_net(kObs + 2, 2.0);
  const Matrix next_obs = Matrix::Zero(kObs, 2);
  const Matrix next_action = Matrix::Zero(2, 2);
  Vector logp(2);
  logp << 0.6, 0.6;
  Vector terminal(2);
  terminal << 0.0, 1.0;
  const Vector y = proxy_q_target(q1t, q2t, next_obs, next_action, logp, terminal, 0.5, 0.99);
  CHECK_NEAR(y(0), 1.188, 1e-12);
  CHECK_EQ(y(1), 0.0);

  Vector reward(2);
  reward << 1.0, -2.0;
  const Vector yr =
    proxy_q_target(q1t, q2t, next_obs, next_action, logp, terminal, 0.5, 0.99, &reward);
  CHECK_NEAR(yr(0), 2.188, 1e-12);
  CHECK_NEAR(yr(1), -2.0, 1e-12);
}

TEST_CASE("targets: intervention value target by hand")
{
  std::mt19937_64 rng(1);
  Batch b = random_batch(kObs, 3, rng);
  b.cost << 0.4, 0.0, 2.0;
  b.terminal << 0.0, 0.0, 1.0;
  const auto qint = constant_net(kObs + 2, 0.25);
  const auto boot = constant_net(kObs + 2, 1.0);
  const auto r = qint_loss(qint, boot, b, Matrix::Zero(2, 3), 0.99);
  CHECK_NEAR(r.target(0), 1.39, 1e-12);
  CHECK_NEAR(r.target(1), 0.99, 1e-12);
  CHECK_NEAR(r.target(2), 2.0, 1e-12);
  const double expected =
    (std::pow(0.25 - 1.39, 2) + std::pow(0.25 - 0.99, 2) + std::pow(0.25 - 2.0, 2)) / 3.0;
  CHECK_NEAR(r.loss, expected, 1e-12);
}

TEST_CASE("conservative: linear critic by hand")
{
  // Q = 5 * steer, so Q(s, a_n) - Q(s, a_h) = 10 for a_n = (1, 0), a_h = (-1, 0).
  ParamSet q;
  Matrix w = Matrix::Zero(1, kObs + 2);
  w(0, kObs) = 5.0;
  q.layers.push_back({w, Vector::Zero(1)});
  Batch b;
  b.obs = Matrix::Zero(kObs, 2);
  b.next_obs = b.obs;
  b.agent_action = Matrix::Zero(2, 2);
  b.agent_action.col(0) << 1.0, 0.0;
  b.expert_action = Matrix::Zero(2, 2);
  b.expert_action.col(0) << -1.0, 0.0;
  b.executed = b.agent_action;
  b.executed.col(0) = b.expert_action.col(0);
  b.intervened = Vector::Zero(2);
  b.intervened(0) = 1.0;
  b.cost = Vector::Zero(2);
  b.terminal = Vector::Zero(2);
  const Vector y = Vector::Zero(2);

  const auto per_intervened = proxy_q_loss(q, b, y, 1.0, ConservativeNormalization::kIntervened);
  CHECK_NEAR(per_intervened.conservative, 10.0, 1e-12);
  CHECK_NEAR(per_intervened.q_gap, -10.0, 1e-12);
  CHECK_EQ(per_intervened.intervened, 1);
  const auto per_batch = proxy_q_loss(q, b, y, 1.0, ConservativeNormalization::kBatch);
  CHECK_NEAR(per_batch.conservative, 5.0, 1e-12);
  // td: Q(exec) = -5 and 0 against y = 0.
  CHECK_NEAR(per_batch.td_loss, 12.5, 1e-12);
  CHECK_NEAR(per_batch.loss, 12.5 + 5.0, 1e-12);
}

TEST_CASE("conservative: no intervened samples leaves only td")
{
  std::mt19937_64 rng(2);
  Batch b = random_batch(kObs, 6, rng);
  b.intervened.setZero();
  b.expert_action.setZero();
  b.executed = b.agent_action;
  const auto q = random_net({kObs + 2, 8, 1}, Activation::kTanh, 4);
  const Vector y = Vector::Zero(6);
  for (auto norm : {ConservativeNormalization::kBatch, ConservativeNormalization::kIntervened}) {
    const auto r = proxy_q_loss(q, b, y, 10.0, norm);
    CHECK_EQ(r.conservative, 0.0);
    CHECK_EQ(r.loss, r.td_loss);
  }
}

TEST_CASE("conservative: a gradient step widens the gap toward the expert")
{
  std::mt19937_64 rng(9);
  Batch b = random_batch(kObs, 16, rng);
  auto q = random_net({kObs + 2, 16, 1}, Activation::kTanh, 9);
  const Vector y = Vector::Zero(16);
  const auto before = proxy_q_loss(q, b, y, 10.0);
  auto flat = numeric::flatten(q);
  const auto g = numeric::flatten(before.grad);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    flat[i] -= 1e-3 * g[i];
  }
  numeric::unflatten(flat, q);
  CHECK_GT(proxy_q_loss(q, b, y, 10.0).q_gap, before.q_gap);
}

TEST_CASE("gradients: proxy q loss matches finite differences")
{
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    CHECK_LT(max_gradient_error_proxy(seed, ConservativeNormalization::kBatch), 1e-6);
    CHECK_LT(max_gradient_error_proxy(seed, ConservativeNormalization::kIntervened), 1e-6);
  }
}

TEST_CASE("gradients: intervention value loss matches finite differences")
{
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    const auto qint = random_net({kObs + 2, 6, 1}, Activation::kTanh, seed);
    const Batch b = random_batch(kObs, 7, rng);
    const Matrix next_action = normal_matrix(2, 7, rng).array().tanh();
    const auto res = qint_loss(qint, qint, b, next_action, 0.99);
    const auto fd = test::numeric_gradient(
      qint, [&](const ParamSet & p) { return qint_loss(p, qint, b, next_action, 0.99).loss; });
    CHECK_LT(relative_error(numeric::flatten(res.grad), fd), 1e-6);
  }
}

TEST_CASE("gradients: policy loss matches finite differences")
{
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed + 100);
    const auto policy = random_net({kObs, 6, 4}, Activation::kTanh, seed);
    const auto q1 = random_net({kObs + 2, 6, 1}, Activation::kTanh, seed + 1);
    const auto q2 = random_net({kObs + 2, 6, 1}, Activation::kTanh, seed + 2);
    const auto qint = random_net({kObs + 2, 6, 1}, Activation::kTanh, seed + 3);
    const Matrix obs = normal_matrix(kObs, 7, rng);
    const Matrix noise = normal_matrix(2, 7, rng);
    const ParamSet * qi = seed % 2 == 0 ? &qint : nullptr;
    const auto res = policy_loss(policy, obs, noise, q1, q2, qi, 0.3);
    const auto fd = test::numeric_gradient(policy, [&](const ParamSet & p) {
      return policy_loss(p, obs, noise, q1, q2, qi, 0.3).loss;
    });
    CHECK_LT(relative_error(numeric::flatten(res.grad), fd), 1e-5);
  }
}

TEST_CASE("gradients: behavior cloning loss matches finite differences")
{
  std::mt19937_64 rng(4);
  const auto policy = random_net({kObs, 6, 4}, Activation::kTanh, 4);
  const Matrix obs = normal_matrix(kObs, 9, rng);
  const Matrix actions = (0.9 * normal_matrix(2, 9, rng).array().tanh()).matrix();
  const auto res = behavior_cloning_loss(policy, obs, actions);
  const auto fd = test::numeric_gradient(
    policy, [&](const ParamSet & p) { return behavior_cloning_loss(p, obs, actions).loss; });
  CHECK_LT(relative_error(numeric::flatten(res.grad), fd), 1e-6);
}

TEST_CASE("gradients: temperature")
{
  Vector logp(3);
  logp << -1.0, 0.5, 2.0;
  const double h = 1e-6;
  for (const double la : {-3.0, 0.0, 1.2}) {
    const double fd = (alpha_loss(la + h, logp, 2.0) - alpha_loss(la - h, logp, 2.0)) / (2 * h);
    CHECK_NEAR(alpha_gradient(la, logp, 2.0), fd, 1e-7);
  }
  // Entropy above target (log pi + H < 0) pushes alpha down.
  CHECK_GT(alpha_gradient(0.0, Vector::Constant(3, -3.0), 2.0), 0.0);
}

TEST_CASE("replay: fifo overwrite and logical order")
{
  ReplayBuffer buf(3, 4);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.obs = Observation::Constant(3, i);
    t.next_obs = Observation::Constant(3, i + 1);
    t.agent_action = Action(0.1 * i, 0);
    buf.push(t);
  }
  CHECK_EQ(buf.size(), 4u);
  CHECK_EQ(buf.total_pushed(), 6);
  CHECK_EQ(buf.at(0).obs(0), 2.0);
  CHECK_EQ(buf.at(3).obs(0), 5.0);
}

TEST_CASE("replay: invariants are enforced")
{
  ReplayBuffer buf(3, 4);
  Transition t;
  t.obs = Observation::Zero(3);
  t.next_obs = Observation::Zero(3);
  t.intervened = true;
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  t.expert_action = Action(1, 0);
  t.rising_cost = 2.5;
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  t.rising_cost = 1.0;
  buf.push(t);
  t.intervened = false;
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  t.expert_action.reset();
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  t.rising_cost = 0.0;
  t.obs = Observation::Zero(2);
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
}

TEST_CASE("replay: gather fills expert action only when intervened")
{
  ReplayBuffer buf(2, 8);
  Transition a;
  a.obs = Observation::Zero(2);
  a.next_obs = Observation::Zero(2);
  a.agent_action = Action(0.5, 0.5);
  const auto s0 = buf.push(a);
  a.intervened = true;
  a.expert_action = Action(-1, 1);
  a.rising_cost = 2.0;
  const auto s1 = buf.push(a);
  const std::vector<std::size_t> slots{s0, s1};
  const Batch b = buf.gather(slots);
  CHECK(b.expert_action.col(0).isZero(0.0));
  CHECK_EQ(b.executed(0, 1), -1.0);
  CHECK_EQ(b.executed(0, 0), 0.5);
  CHECK_EQ(b.cost(1), 2.0);
}

namespace
{

TrainConfig small_config()
{
  TrainConfig cfg;
  cfg.network.hidden = {16, 16};
  cfg.batch_size = 16;
  cfg.learning_starts = 32;
  cfg.steps_per_iteration = 20;
  cfg.gradient_steps_per_iteration = 20;
  cfg.buffer_capacity = 500;
  return cfg;
}

std::vector<std::shared_ptr<const env::MapSpec>> two_maps()
{
  return {
    std::make_shared<env::MapSpec>(env::generate_map(1, env::Difficulty{})),
    std::make_shared<env::MapSpec>(env::generate_map(2, env::Difficulty{}))};
}

numeric::Checkpoint run_small(TrainerOptions options, std::int64_t steps = 150)
{
  env::EnvConfig env_cfg;
  Trainer trainer(env_cfg, small_config(), two_maps(), 17, options);
  guardian::ScriptedGuardian g(env_cfg, {});
  run_training(trainer, g, steps);
  return to_checkpoint(trainer.learner(), 0);
}

}  // namespace

TEST_CASE("learner: config validation")
{
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.conventional_target_entropy = true;
  CHECK_EQ(cfg.effective_target_entropy(), -2.0);
}

TEST_CASE("learner: checkpoint round trip")
{
  auto cfg = small_config();
  auto state = make_learner(35, cfg, 3);
  state.log_alpha = -0.7;
  state.gradient_steps = 12;
  state.update_rng.discard(5);
  const auto back = from_checkpoint(numeric::Checkpoint::decode(to_checkpoint(state, 9).encode()));
  CHECK(back == state);
  CHECK(rng_to_string(back.update_rng) == rng_to_string(state.update_rng));
}

TEST_CASE("learner: seeds determine the initial networks")
{
  const auto cfg = small_config();
  CHECK(make_learner(35, cfg, 4) == make_learner(35, cfg, 4));
  CHECK_FALSE(make_learner(35, cfg, 4) == make_learner(35, cfg, 5));
}

TEST_CASE("learner: warm up does nothing")
{
  const auto cfg = small_config();
  auto state = make_learner(3, cfg, 1);
  const auto before = state;
  ReplayBuffer buf(3, 100);
  const auto d = train_steps(state, buf, {}, cfg, 5);
  CHECK(d.warming_up);
  CHECK(state == before);
}

TEST_CASE("trainer: identical seeds give identical checkpoints")
{
  CHECK(run_small({}) == run_small({}));
}

TEST_CASE("trainer: zeroed reward does not change a reward free run")
{
  TrainerOptions zero;
  zero.zero_reward = true;
  CHECK(run_small({}).encode() == run_small(zero).encode());
}

TEST_CASE("trainer: shaped reward changes the run")
{
  TrainerOptions shaped;
  shaped.reward_channel = RewardChannel::kShaped;
  CHECK_FALSE(run_small({}).encode() == run_small(shaped).encode());
}

TEST_CASE("trainer: buffered costs follow the rising edge")
{
  env::EnvConfig env_cfg;
  Trainer trainer(env_cfg, small_config(), two_maps(), 8);
  guardian::ScriptedGuardian g(env_cfg, {});
  bool prev = false;
  int takeovers = 0;
  for (int i = 0; i < 400; ++i) {
    if (trainer.at_episode_start()) {
      prev = false;
    }
    const auto tick = trainer.step(g);
    const auto t = trainer.buffer().at_slot(tick.slot);
    CHECK_EQ(t.intervened, tick.decision.intervene);
    if (t.intervened && !prev) {
      ++takeovers;
      CHECK_EQ(t.rising_cost, doctest::Approx(
                                intervention_cost(tick.agent_action, *tick.decision.expert_action).value));
    } else {
      CHECK_EQ(t.rising_cost, 0.0);
    }
    prev = t.intervened;
  }
  CHECK_GT(takeovers, 0);
}

}  // namespace haco::learner
