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

#ifndef HACO__LEARNER__REPLAY_BUFFER_HPP_
#define HACO__LEARNER__REPLAY_BUFFER_HPP_

#include "haco/env/driving_env.hpp"
#include "haco/numeric/mlp.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace haco::learner
{

using env::Action;
using env::Observation;
using numeric::Matrix;
using numeric::Vector;

/// One buffered step. There is deliberately no reward or environment cost.
struct Transition
{
  Observation obs;
  Action agent_action = Action::Zero();
  std::optional<Action> expert_action;  // present iff intervened
  bool intervened = false;
  double rising_cost = 0.0;  // [0, 2], nonzero only on the first step of a takeover
  Observation next_obs;
  bool terminal = false;

  /// The action the environment actually received.
  Action executed() const { return intervened ? *expert_action : agent_action; }
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Columnar view of sampled transitions; columns are samples.
struct Batch
{
  Matrix obs;
  Matrix next_obs;
  Matrix agent_action;
  Matrix expert_action;  // zero columns where not intervened
  Matrix executed;
  Vector intervened;  // 0 / 1
  Vector cost;
  Vector terminal;  // 0 / 1
  std::vector<std::size_t> slots;

  Eigen::Index size() const { return obs.cols(); }
};

/// Bounded FIFO of transitions stored column-wise. Logical index 0 is the
/// oldest element; a full buffer overwrites it first.
class ReplayBuffer
{
public:
  ReplayBuffer(Eigen::Index obs_dim, std::size_t capacity);

  /// Appends and returns the physical slot written.
  std::size_t push(const Transition & t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  Eigen::Index obs_dim() const { return obs_dim_; }
  std::int64_t total_pushed() const { return total_pushed_; }

  std::size_t slot(std::size_t index) const;
  Transition at(std::size_t index) const;
  Transition at_slot(std::size_t slot) const;

  Batch gather(std::span<const std::size_t> slots) const;
  /// Uniform sample with replacement.
  Batch sample(std::size_t n, std::mt19937_64 & rng) const;

  /// Deterministic byte image of the logical contents (oldest first).
  std::vector<std::uint8_t> encode() const;
  bool operator==(const ReplayBuffer & other) const { return encode() == other.encode(); }

private:
  Eigen::Index obs_dim_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to write
  std::size_t size_ = 0;
  std::int64_t total_pushed_ = 0;
  Matrix obs_;
  Matrix next_obs_;
  Matrix agent_action_;
  Matrix expert_action_;
  std::vector<std::uint8_t> intervened_;
  std::vector<double> cost_;
  std::vector<std::uint8_t> terminal_;
};

}  // namespace haco::learner

#endif  // HACO__LEARNER__REPLAY_BUFFER_HPP_
