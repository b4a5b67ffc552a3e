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

#include <spdlog/spdlog.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace haco::learner
{

double TrainConfig::effective_target_entropy() const
{
  return conventional_target_entropy ? -static_cast<double>(kActionDim) : target_entropy;
}

void TrainConfig::validate() const
{
  auto require = [](bool ok, const char * what) {
    if (!ok) {
      throw std::invalid_argument(std::string("TrainConfig: ") + what);
    }
  };
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(cql_weight >= 0.0, "cql_weight must be >= 0");
  require(std::isfinite(target_entropy), "target_entropy must be finite");
  require(initial_alpha > 0.0, "initial_alpha must be positive");
  require(learning_starts >= 1, "learning_starts must be >= 1");
  require(steps_per_iteration >= 1, "steps_per_iteration must be >= 1");
  require(gradient_steps_per_iteration >= 0, "gradient_steps_per_iteration must be >= 0");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(!network.hidden.empty(), "network needs at least one hidden layer");
  for (const int h : network.hidden) {
    require(h >= 1, "hidden layer sizes must be >= 1");
  }
}

double LearnerState::alpha() const { return std::exp(log_alpha); }

bool LearnerState::operator==(const LearnerState & other) const
{
  return to_checkpoint(*this, 0) == to_checkpoint(other, 0);
}

namespace
{

std::vector<int> layer_sizes(int in, const std::vector<int> & hidden, int out)
{
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 & rng)
{
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

void apply(ParamSet & params, const ParamSet & grad, numeric::OptState & opt, double lr,
           const char * what)
{
  if (!numeric::adam_step(params, grad, opt, lr)) {
    throw numeric::NonFiniteError(std::string("non-finite gradient in ") + what);
  }
}

void require_finite_loss(double value, const char * what)
{
  if (!std::isfinite(value)) {
    throw numeric::NonFiniteError(std::string("non-finite loss in ") + what);
  }
}

}  // namespace

LearnerState make_learner(Eigen::Index obs_dim, const TrainConfig & cfg, std::uint64_t seed)
{
  cfg.validate();
  std::mt19937_64 init(seed);
  const int in = static_cast<int>(obs_dim);
  const auto & net = cfg.network;
  LearnerState s;
  s.policy = numeric::make_mlp(layer_sizes(in, net.hidden, 2 * kActionDim), net.activation, init);
  const auto critic = layer_sizes(in + kActionDim, net.hidden, 1);
  s.q1 = numeric::make_mlp(critic, net.activation, init);
  s.q2 = numeric::make_mlp(critic, net.activation, init);
  s.qint = numeric::make_mlp(critic, net.activation, init);
  s.q1_target = s.q1;
  s.q2_target = s.q2;
  s.qint_target = s.qint;
  s.policy_opt = numeric::OptState::for_params(s.policy);
  s.q1_opt = numeric::OptState::for_params(s.q1);
  s.q2_opt = numeric::OptState::for_params(s.q2);
  s.qint_opt = numeric::OptState::for_params(s.qint);
  s.log_alpha = std::log(cfg.initial_alpha);
  std::seed_seq stream{seed & 0xffffffffU, seed >> 32, std::uint64_t{0x75706474}};
  s.update_rng.seed(stream);
  return s;
}

Diagnostics gradient_step(
  LearnerState & s, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg)
{
  const auto n = static_cast<std::size_t>(cfg.batch_size);
  const Batch batch = buffer.sample(n, s.update_rng);
  const Matrix noise_next = standard_normal(kActionDim, batch.size(), s.update_rng);
  const Matrix noise_now = standard_normal(kActionDim, batch.size(), s.update_rng);
  const double alpha = s.alpha();
  const double lr = cfg.learning_rate;

  const PolicyPass next = policy_forward(s.policy, batch.next_obs, noise_next);
  Vector reward;
  if (!rewards.empty()) {
    reward.resize(batch.size());
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      reward(j) = rewards[batch.slots[static_cast<std::size_t>(j)]];
    }
  }
  const Vector y = proxy_q_target(
    s.q1_target, s.q2_target, batch.next_obs, next.sample.action, next.sample.log_prob,
    batch.terminal, alpha, cfg.gamma, rewards.empty() ? nullptr : &reward);

  const ProxyQLoss l1 =
    proxy_q_loss(s.q1, batch, y, cfg.cql_weight, cfg.conservative_normalization);
  const ProxyQLoss l2 =
    proxy_q_loss(s.q2, batch, y, cfg.cql_weight, cfg.conservative_normalization);
  require_finite_loss(l1.loss + l2.loss, "proxy value");
  apply(s.q1, l1.grad, s.q1_opt, lr, "proxy value 1");
  apply(s.q2, l2.grad, s.q2_opt, lr, "proxy value 2");

  Diagnostics d;
  if (cfg.use_qint) {
    const ParamSet & boot = cfg.qint_target_network ? s.qint_target : s.qint;
    const ValueLoss li = qint_loss(s.qint, boot, batch, next.sample.action, cfg.gamma);
    require_finite_loss(li.loss, "intervention value");
    apply(s.qint, li.grad, s.qint_opt, lr, "intervention value");
    d.qint_loss = li.loss;
  }

  const PolicyLoss lp = policy_loss(
    s.policy, batch.obs, noise_now, s.q1, s.q2, cfg.use_qint ? &s.qint : nullptr, alpha);
  require_finite_loss(lp.loss, "policy");
  apply(s.policy, lp.grad, s.policy_opt, lr, "policy");

  const double target = cfg.effective_target_entropy();
  d.alpha_loss = alpha_loss(s.log_alpha, lp.log_prob, target);
  if (!numeric::adam_step(
        s.log_alpha, alpha_gradient(s.log_alpha, lp.log_prob, target), s.alpha_opt, lr)) {
    throw numeric::NonFiniteError("non-finite gradient in temperature");
  }

  numeric::polyak_update(s.q1_target, s.q1, cfg.tau);
  numeric::polyak_update(s.q2_target, s.q2, cfg.tau);
  if (cfg.qint_target_network) {
    numeric::polyak_update(s.qint_target, s.qint, cfg.tau);
  }
  ++s.gradient_steps;

  d.gradient_steps = 1;
  d.q_loss = l1.loss + l2.loss;
  d.td_loss = l1.td_loss + l2.td_loss;
  d.conservative = l1.conservative + l2.conservative;
  d.policy_loss = lp.loss;
  d.alpha = s.alpha();
  d.entropy = -lp.mean_log_prob;
  d.q_gap = 0.5 * (l1.q_gap + l2.q_gap);
  d.intervened_samples = l1.intervened;
  return d;
}

Diagnostics train_steps(
  LearnerState & state, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg, int n)
{
  Diagnostics total;
  total.alpha = state.alpha();
  if (buffer.size() < static_cast<std::size_t>(cfg.learning_starts)) {
    total.warming_up = true;
    total.message = "warming up";
    return total;
  }
  if (!rewards.empty() && rewards.size() < buffer.capacity()) {
    throw std::invalid_argument("train_steps: reward channel must cover every buffer slot");
  }
  const LearnerState entry = state;
  std::int64_t gap_samples = 0;
  double gap_sum = 0.0;
  try {
    for (int i = 0; i < n; ++i) {
      const Diagnostics d = gradient_step(state, buffer, rewards, cfg);
      ++total.gradient_steps;
      total.q_loss += d.q_loss;
      total.td_loss += d.td_loss;
      total.conservative += d.conservative;
      total.qint_loss += d.qint_loss;
      total.policy_loss += d.policy_loss;
      total.alpha_loss += d.alpha_loss;
      total.entropy += d.entropy;
      gap_sum += d.q_gap * static_cast<double>(d.intervened_samples);
      gap_samples += d.intervened_samples;
    }
  } catch (const numeric::NonFiniteError & e) {
    spdlog::error("update aborted after {} gradient steps: {}", total.gradient_steps, e.what());
    state = entry;
    Diagnostics aborted;
    aborted.aborted = true;
    aborted.alpha = state.alpha();
    aborted.message = e.what();
    return aborted;
  }
  if (total.gradient_steps > 0) {
    const double k = total.gradient_steps;
    total.q_loss /= k;
    total.td_loss /= k;
    total.conservative /= k;
    total.qint_loss /= k;
    total.policy_loss /= k;
    total.alpha_loss /= k;
    total.entropy /= k;
  }
  total.q_gap = gap_samples > 0 ? gap_sum / static_cast<double>(gap_samples) : 0.0;
  total.intervened_samples = gap_samples;
  total.alpha = state.alpha();
  ++state.iterations;
  return total;
}

Diagnostics train_iteration(
  LearnerState & state, const ReplayBuffer & buffer, std::span<const double> rewards,
  const TrainConfig & cfg)
{
  return train_steps(state, buffer, rewards, cfg, cfg.gradient_steps_per_iteration);
}

Action sample_action(const ParamSet & policy, const Observation & obs, const Vector & noise)
{
  const Matrix head = numeric::forward(policy, Matrix(obs));
  return numeric::sample_policy_head(head, Matrix(noise)).action.col(0);
}

Action mean_action(const ParamSet & policy, const Observation & obs)
{
  return numeric::deterministic_action(numeric::forward(policy, Matrix(obs))).col(0);
}

std::string rng_to_string(const std::mt19937_64 & rng)
{
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 rng_from_string(const std::string & text)
{
  std::istringstream in(text);
  std::mt19937_64 rng;
  in >> rng;
  if (in.fail()) {
    throw numeric::CheckpointError("cannot parse random engine state");
  }
  return rng;
}

numeric::Checkpoint to_checkpoint(const LearnerState & s, std::uint64_t config_hash)
{
  numeric::Checkpoint c;
  c.config_hash = config_hash;
  c.params = {
    {"policy", s.policy}, {"q1", s.q1}, {"q2", s.q2}, {"q1_target", s.q1_target},
    {"q2_target", s.q2_target}, {"qint", s.qint}, {"qint_target", s.qint_target}};
  c.optimizers = {
    {"policy", s.policy_opt}, {"q1", s.q1_opt}, {"q2", s.q2_opt}, {"qint", s.qint_opt}};
  c.scalar_optimizers = {{"log_alpha", s.alpha_opt}};
  c.scalars = {
    {"log_alpha", s.log_alpha},
    {"gradient_steps", static_cast<double>(s.gradient_steps)},
    {"iterations", static_cast<double>(s.iterations)}};
  c.blobs = {{"update_rng", rng_to_string(s.update_rng)}};
  return c;
}

namespace
{

template <typename Map>
const typename Map::mapped_type & lookup(const Map & m, const std::string & key)
{
  const auto it = m.find(key);
  if (it == m.end()) {
    throw numeric::CheckpointError("checkpoint is missing '" + key + "'");
  }
  return it->second;
}

}  // namespace

LearnerState from_checkpoint(const numeric::Checkpoint & c)
{
  LearnerState s;
  s.policy = lookup(c.params, "policy");
  s.q1 = lookup(c.params, "q1");
  s.q2 = lookup(c.params, "q2");
  s.q1_target = lookup(c.params, "q1_target");
  s.q2_target = lookup(c.params, "q2_target");
  s.qint = lookup(c.params, "qint");
  s.qint_target = lookup(c.params, "qint_target");
  s.policy_opt = lookup(c.optimizers, "policy");
  s.q1_opt = lookup(c.optimizers, "q1");
  s.q2_opt = lookup(c.optimizers, "q2");
  s.qint_opt = lookup(c.optimizers, "qint");
  s.alpha_opt = lookup(c.scalar_optimizers, "log_alpha");
  s.log_alpha = lookup(c.scalars, "log_alpha");
  s.gradient_steps = static_cast<std::int64_t>(lookup(c.scalars, "gradient_steps"));
  s.iterations = static_cast<std::int64_t>(lookup(c.scalars, "iterations"));
  s.update_rng = rng_from_string(lookup(c.blobs, "update_rng"));
  for (const auto * p : {&s.policy, &s.q1, &s.q2, &s.q1_target, &s.q2_target, &s.qint}) {
    p->validate();
  }
  if (s.q1.input_dim() != s.policy.input_dim() + kActionDim) {
    throw numeric::CheckpointError("checkpoint critic and policy dimensions disagree");
  }
  return s;
}

}  // namespace haco::learner
