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

#include "haco/numeric/optim.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace haco::numeric
{

OptState OptState::for_params(const ParamSet & params)
{
  return OptState{params.zeros_like(), params.zeros_like(), 0};
}

bool adam_step(
  ParamSet & params, const ParamSet & grads, OptState & opt, double lr, const AdamConfig & cfg)
{
  if (
    !same_shape(params, grads) || !same_shape(params, opt.first_moment) ||
    !same_shape(params, opt.second_moment)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  if (!grads.all_finite()) {
    spdlog::warn("adam_step: non-finite gradient at step {}, update skipped", opt.step);
    return false;
  }
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto update = [&](auto & p, const auto & g, auto & m, auto & v) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / correction1) /
                   ((v.array() / correction2).sqrt() + cfg.epsilon);
    };
    update(
      params.layers[i].weight, grads.layers[i].weight, opt.first_moment.layers[i].weight,
      opt.second_moment.layers[i].weight);
    update(
      params.layers[i].bias, grads.layers[i].bias, opt.first_moment.layers[i].bias,
      opt.second_moment.layers[i].bias);
  }
  return true;
}

bool adam_step(double & param, double grad, ScalarOptState & opt, double lr, const AdamConfig & cfg)
{
  if (!std::isfinite(grad)) {
    spdlog::warn("adam_step: non-finite scalar gradient at step {}, update skipped", opt.step);
    return false;
  }
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  opt.first_moment = cfg.beta1 * opt.first_moment + (1.0 - cfg.beta1) * grad;
  opt.second_moment = cfg.beta2 * opt.second_moment + (1.0 - cfg.beta2) * grad * grad;
  const double m_hat = opt.first_moment / (1.0 - std::pow(cfg.beta1, t));
  const double v_hat = opt.second_moment / (1.0 - std::pow(cfg.beta2, t));
  param -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  return true;
}

ParamSet polyak(const ParamSet & target, const ParamSet & online, double tau)
{
  ParamSet out = target;
  polyak_update(out, online, tau);
  return out;
}

void polyak_update(ParamSet & target, const ParamSet & online, double tau)
{
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("polyak: tau must lie in [0, 1]");
  }
  if (!same_shape(target, online)) {
    throw ShapeError("polyak: target and online shapes differ");
  }
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    target.layers[i].weight = (1.0 - tau) * target.layers[i].weight + tau * online.layers[i].weight;
    target.layers[i].bias = (1.0 - tau) * target.layers[i].bias + tau * online.layers[i].bias;
  }
}

}  // namespace haco::numeric
