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

#include "haco/learner/replay_buffer.hpp"

#include <algorithm>
#include <stdexcept>

namespace haco::learner
{

void Transition::validate() const
{
  if (intervened != expert_action.has_value()) {
    throw std::invalid_argument("Transition: expert action must be present iff intervened");
  }
  if (!(rising_cost >= 0.0 && rising_cost <= 2.0)) {
    throw std::invalid_argument("Transition: rising cost must lie in [0, 2]");
  }
  if (!intervened && rising_cost != 0.0) {
    throw std::invalid_argument("Transition: rising cost on a non-intervened step");
  }
  if (obs.size() != next_obs.size()) {
    throw std::invalid_argument("Transition: observation sizes differ");
  }
}

ReplayBuffer::ReplayBuffer(Eigen::Index obs_dim, std::size_t capacity)
: obs_dim_(obs_dim), capacity_(capacity)
{
  if (obs_dim < 1 || capacity < 1) {
    throw std::invalid_argument("ReplayBuffer: obs_dim and capacity must be >= 1");
  }
  const auto cap = static_cast<Eigen::Index>(capacity);
  obs_ = Matrix::Zero(obs_dim, cap);
  next_obs_ = Matrix::Zero(obs_dim, cap);
  agent_action_ = Matrix::Zero(2, cap);
  expert_action_ = Matrix::Zero(2, cap);
  intervened_.assign(capacity, 0);
  cost_.assign(capacity, 0.0);
  terminal_.assign(capacity, 0);
}

std::size_t ReplayBuffer::push(const Transition & t)
{
  t.validate();
  if (t.obs.size() != obs_dim_) {
    throw std::invalid_argument("ReplayBuffer: observation has the wrong length");
  }
  const std::size_t s = head_;
  const auto c = static_cast<Eigen::Index>(s);
  obs_.col(c) = t.obs;
  next_obs_.col(c) = t.next_obs;
  agent_action_.col(c) = t.agent_action;
  expert_action_.col(c) = t.intervened ? *t.expert_action : Action(Action::Zero());
  intervened_[s] = t.intervened ? 1 : 0;
  cost_[s] = t.rising_cost;
  terminal_[s] = t.terminal ? 1 : 0;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++total_pushed_;
  return s;
}

std::size_t ReplayBuffer::slot(std::size_t index) const
{
  if (index >= size_) {
    throw std::out_of_range("ReplayBuffer: index out of range");
  }
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return (oldest + index) % capacity_;
}

Transition ReplayBuffer::at(std::size_t index) const { return at_slot(slot(index)); }

Transition ReplayBuffer::at_slot(std::size_t s) const
{
  if (s >= capacity_) {
    throw std::out_of_range("ReplayBuffer: slot out of range");
  }
  const auto c = static_cast<Eigen::Index>(s);
  Transition t;
  t.obs = obs_.col(c);
  t.next_obs = next_obs_.col(c);
  t.agent_action = agent_action_.col(c);
  t.intervened = intervened_[s] != 0;
  if (t.intervened) {
    t.expert_action = Action(expert_action_.col(c));
  }
  t.rising_cost = cost_[s];
  t.terminal = terminal_[s] != 0;
  return t;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const
{
  const auto n = static_cast<Eigen::Index>(slots.size());
  Batch b;
  b.obs.resize(obs_dim_, n);
  b.next_obs.resize(obs_dim_, n);
  b.agent_action.resize(2, n);
  b.expert_action.resize(2, n);
  b.executed.resize(2, n);
  b.intervened.resize(n);
  b.cost.resize(n);
  b.terminal.resize(n);
  b.slots.assign(slots.begin(), slots.end());
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t s = slots[static_cast<std::size_t>(j)];
    if (s >= capacity_) {
      throw std::out_of_range("ReplayBuffer: slot out of range");
    }
    const auto c = static_cast<Eigen::Index>(s);
    b.obs.col(j) = obs_.col(c);
    b.next_obs.col(j) = next_obs_.col(c);
    b.agent_action.col(j) = agent_action_.col(c);
    b.expert_action.col(j) = expert_action_.col(c);
    b.intervened(j) = intervened_[s];
    b.executed.col(j) = intervened_[s] ? expert_action_.col(c) : agent_action_.col(c);
    b.cost(j) = cost_[s];
    b.terminal(j) = terminal_[s];
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t n, std::mt19937_64 & rng) const
{
  if (size_ == 0) {
    throw std::logic_error("ReplayBuffer: cannot sample from an empty buffer");
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> slots(n);
  for (auto & s : slots) {
    s = slot(pick(rng));
  }
  return gather(slots);
}

namespace
{

template <typename T>
void append_raw(std::vector<std::uint8_t> & out, const T & value)
{
  const auto * p = reinterpret_cast<const std::uint8_t *>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

void append_doubles(std::vector<std::uint8_t> & out, const double * data, Eigen::Index n)
{
  const auto * p = reinterpret_cast<const std::uint8_t *>(data);
  out.insert(out.end(), p, p + n * static_cast<Eigen::Index>(sizeof(double)));
}

}  // namespace

std::vector<std::uint8_t> ReplayBuffer::encode() const
{
  std::vector<std::uint8_t> out;
  append_raw(out, static_cast<std::int64_t>(obs_dim_));
  append_raw(out, static_cast<std::uint64_t>(capacity_));
  append_raw(out, static_cast<std::uint64_t>(size_));
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t s = slot(i);
    const auto c = static_cast<Eigen::Index>(s);
    append_doubles(out, obs_.col(c).data(), obs_dim_);
    append_doubles(out, agent_action_.col(c).data(), 2);
    append_doubles(out, expert_action_.col(c).data(), 2);
    out.push_back(intervened_[s]);
    append_raw(out, cost_[s]);
    append_doubles(out, next_obs_.col(c).data(), obs_dim_);
    out.push_back(terminal_[s]);
  }
  return out;
}

}  // namespace haco::learner
