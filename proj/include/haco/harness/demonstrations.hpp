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

#ifndef HACO__HARNESS__DEMONSTRATIONS_HPP_
#define HACO__HARNESS__DEMONSTRATIONS_HPP_

#include "haco/harness/evaluation.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace haco::harness
{

inline constexpr int kDemoLogVersion = 1;

/// Guardian-only rollouts as (observation, action) pairs.
struct Demonstrations
{
  int obs_dim = 0;
  std::vector<env::Observation> obs;
  std::vector<env::Action> actions;

  std::size_t size() const { return obs.size(); }
};

class DemoLogError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// The guardian drives alone for `n_steps` env steps, cycling through `maps`.
/// Writes a header line followed by one JSON record per step.
Demonstrations record_demonstrations(
  const guardian::Guardian & guardian, const env::EnvConfig & env_cfg, const MapList & maps,
  std::int64_t n_steps, std::ostream * out = nullptr);

void write_demo_header(std::ostream & out, int obs_dim);
Demonstrations read_demonstrations(std::istream & in);

struct BcResult
{
  learner::LearnerState state;
  double final_loss = 0.0;
};

/// Maximum-likelihood fit of the policy on minibatches of the demonstrations.
/// Critics are left at their initial values.
BcResult train_behavior_cloning(
  const Demonstrations & demos, const learner::TrainConfig & cfg, std::uint64_t seed,
  int gradient_steps);

}  // namespace haco::harness

#endif  // HACO__HARNESS__DEMONSTRATIONS_HPP_
