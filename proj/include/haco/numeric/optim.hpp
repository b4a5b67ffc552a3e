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

#ifndef HACO__NUMERIC__OPTIM_HPP_
#define HACO__NUMERIC__OPTIM_HPP_

#include "haco/numeric/mlp.hpp"

#include <cstdint>

namespace haco::numeric
{

struct AdamConfig
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments mirroring one ParamSet.
struct OptState
{
  ParamSet first_moment;
  ParamSet second_moment;
  std::int64_t step = 0;

  static OptState for_params(const ParamSet & params);
};

struct ScalarOptState
{
  double first_moment = 0.0;
  double second_moment = 0.0;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update in place. A gradient containing NaN/inf is
/// rejected: nothing changes and false is returned.
bool adam_step(
  ParamSet & params, const ParamSet & grads, OptState & opt, double lr,
  const AdamConfig & cfg = {});

bool adam_step(
  double & param, double grad, ScalarOptState & opt, double lr, const AdamConfig & cfg = {});

/// (1 - tau) * target + tau * online, elementwise.
ParamSet polyak(const ParamSet & target, const ParamSet & online, double tau);
void polyak_update(ParamSet & target, const ParamSet & online, double tau);

}  // namespace haco::numeric

#endif  // HACO__NUMERIC__OPTIM_HPP_
