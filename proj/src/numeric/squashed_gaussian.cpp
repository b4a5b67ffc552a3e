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

#include "haco/numeric/squashed_gaussian.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace haco::numeric
{

namespace
{

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_head(const Matrix & head_output, const Matrix & other, const char * what)
{
  if (head_output.rows() % 2 != 0 || head_output.rows() == 0) {
    throw ShapeError("policy head must have an even, positive number of rows");
  }
  if (other.rows() != head_output.rows() / 2 || other.cols() != head_output.cols()) {
    std::ostringstream msg;
    msg << what << " is " << other.rows() << "x" << other.cols() << ", expected "
        << head_output.rows() / 2 << "x" << head_output.cols();
    throw ShapeError(msg.str());
  }
}

}  // namespace

PolicyOutput sample_squashed_gaussian(
  const Vector & mean, const Vector & log_std, const Vector & noise,
  const SquashedGaussianConfig & cfg)
{
  if (mean.size() != log_std.size() || mean.size() != noise.size()) {
    throw ShapeError("sample_squashed_gaussian: mean, log_std and noise lengths differ");
  }
  Matrix head(2 * mean.size(), 1);
  head << mean, log_std;
  const PolicySample s = sample_policy_head(head, noise, cfg);
  return PolicyOutput{s.action.col(0), s.log_prob(0), s.mean.col(0), s.log_std.col(0)};
}

PolicySample sample_policy_head(
  const Matrix & head_output, const Matrix & noise, const SquashedGaussianConfig & cfg)
{
  check_head(head_output, noise, "noise");
  const Eigen::Index d = head_output.rows() / 2;
  PolicySample s;
  s.mean = head_output.topRows(d);
  s.raw_log_std = head_output.bottomRows(d);
  s.log_std = s.raw_log_std.cwiseMax(cfg.log_std_min).cwiseMin(cfg.log_std_max);
  s.noise = noise;
  const Matrix pre = s.mean.array() + s.log_std.array().exp() * noise.array();
  s.action = pre.array().tanh();
  const Eigen::ArrayXXd gaussian =
    -0.5 * noise.array().square() - s.log_std.array() - kHalfLog2Pi;
  const Eigen::ArrayXXd correction =
    (1.0 - s.action.array().square() + cfg.squash_epsilon).log();
  s.log_prob = (gaussian - correction).colwise().sum().transpose();
  // tanh saturates to exactly +-1 in double for |pre| > ~19; keep the open interval.
  constexpr double kEdge = 1.0 - 1e-12;
  s.action = s.action.cwiseMax(-kEdge).cwiseMin(kEdge);
  return s;
}

Matrix policy_head_backward(
  const PolicySample & sample, const Matrix & action_grad, const Vector & log_prob_grad,
  const SquashedGaussianConfig & cfg)
{
  const Eigen::Index d = sample.mean.rows();
  const Eigen::Index batch = sample.mean.cols();
  if (action_grad.rows() != d || action_grad.cols() != batch || log_prob_grad.size() != batch) {
    throw ShapeError("policy_head_backward: gradient shapes do not match the sample");
  }
  const Eigen::ArrayXXd a = sample.action.array();
  const Eigen::ArrayXXd one_minus_a2 = 1.0 - a.square();
  const Eigen::ArrayXXd sigma = sample.log_std.array().exp();
  // d(-log(1 - tanh(u)^2 + eps))/du
  const Eigen::ArrayXXd dcorr_du = 2.0 * a * one_minus_a2 / (one_minus_a2 + cfg.squash_epsilon);
  const Eigen::ArrayXXd lp = log_prob_grad.transpose().replicate(d, 1).array();

  const Eigen::ArrayXXd du = action_grad.array() * one_minus_a2 + lp * dcorr_du;
  Matrix grad(2 * d, batch);
  grad.topRows(d) = du.matrix();
  const Eigen::ArrayXXd dls = du * sigma * sample.noise.array() - lp;
  const Eigen::ArrayXXd inside = ((sample.raw_log_std.array() >= cfg.log_std_min) &&
                                  (sample.raw_log_std.array() <= cfg.log_std_max))
                                   .cast<double>();
  grad.bottomRows(d) = (dls * inside).matrix();
  return grad;
}

namespace
{

Eigen::ArrayXXd clipped_pre_squash(const Matrix & action)
{
  constexpr double kEdge = 1.0 - 1e-6;
  const Eigen::ArrayXXd a = action.array().max(-kEdge).min(kEdge);
  return 0.5 * ((1.0 + a) / (1.0 - a)).log();
}

}  // namespace

Vector squashed_gaussian_log_prob(
  const Matrix & head_output, const Matrix & action, const SquashedGaussianConfig & cfg)
{
  check_head(head_output, action, "action");
  const Eigen::Index d = head_output.rows() / 2;
  const Eigen::ArrayXXd u = clipped_pre_squash(action);
  const Eigen::ArrayXXd mean = head_output.topRows(d).array();
  const Eigen::ArrayXXd log_std =
    head_output.bottomRows(d).array().max(cfg.log_std_min).min(cfg.log_std_max);
  const Eigen::ArrayXXd z = (u - mean) / log_std.exp();
  const Eigen::ArrayXXd squashed = u.tanh();
  const Eigen::ArrayXXd per_dim = -0.5 * z.square() - log_std - kHalfLog2Pi -
                                  (1.0 - squashed.square() + cfg.squash_epsilon).log();
  return per_dim.colwise().sum().transpose();
}

Matrix squashed_gaussian_log_prob_backward(
  const Matrix & head_output, const Matrix & action, const Vector & weight,
  const SquashedGaussianConfig & cfg)
{
  check_head(head_output, action, "action");
  const Eigen::Index d = head_output.rows() / 2;
  const Eigen::ArrayXXd u = clipped_pre_squash(action);
  const Eigen::ArrayXXd mean = head_output.topRows(d).array();
  const Eigen::ArrayXXd raw = head_output.bottomRows(d).array();
  const Eigen::ArrayXXd log_std = raw.max(cfg.log_std_min).min(cfg.log_std_max);
  const Eigen::ArrayXXd inv_var = (-2.0 * log_std).exp();
  const Eigen::ArrayXXd w = weight.transpose().replicate(d, 1).array();
  Matrix grad(2 * d, head_output.cols());
  grad.topRows(d) = (w * (u - mean) * inv_var).matrix();
  const Eigen::ArrayXXd inside =
    ((raw >= cfg.log_std_min) && (raw <= cfg.log_std_max)).cast<double>();
  grad.bottomRows(d) = (w * inside * ((u - mean).square() * inv_var - 1.0)).matrix();
  return grad;
}

Matrix deterministic_action(const Matrix & head_output)
{
  if (head_output.rows() % 2 != 0) {
    throw ShapeError("policy head must have an even number of rows");
  }
  return head_output.topRows(head_output.rows() / 2).array().tanh().matrix();
}

}  // namespace haco::numeric
