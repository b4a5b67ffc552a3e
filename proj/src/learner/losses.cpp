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

#include "haco/learner/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haco::learner
{

CostResult intervention_cost(const Action & agent_action, const Action & expert_action)
{
  const double na = agent_action.norm();
  const double nh = expert_action.norm();
  if (na < 1e-8 || nh < 1e-8) {
    return {1.0, true};
  }
  const double cosine = std::clamp(agent_action.dot(expert_action) / (na * nh), -1.0, 1.0);
  return {1.0 - cosine, false};
}

double rising_edge_cost(bool intervened_now, bool intervened_prev, double raw_cost)
{
  return intervened_now && !intervened_prev ? raw_cost : 0.0;
}

Matrix critic_input(const Matrix & obs, const Matrix & action)
{
  if (obs.cols() != action.cols()) {
    throw numeric::ShapeError("critic_input: observation and action batch sizes differ");
  }
  Matrix in(obs.rows() + action.rows(), obs.cols());
  in << obs, action;
  return in;
}

PolicyPass policy_forward(const ParamSet & policy, const Matrix & obs, const Matrix & noise)
{
  PolicyPass pass;
  const Matrix head = numeric::forward(policy, obs, pass.trace);
  pass.sample = numeric::sample_policy_head(head, noise);
  return pass;
}

Vector proxy_q_target(
  const ParamSet & q1_target, const ParamSet & q2_target, const Matrix & next_obs,
  const Matrix & next_action, const Vector & next_log_prob, const Vector & terminal, double alpha,
  double gamma, const Vector * reward)
{
  const Matrix in = critic_input(next_obs, next_action);
  const Vector q1 = numeric::forward(q1_target, in).row(0).transpose();
  const Vector q2 = numeric::forward(q2_target, in).row(0).transpose();
  const Vector soft = q1.cwiseMin(q2) - alpha * next_log_prob;
  Vector y = gamma * (Vector::Ones(terminal.size()) - terminal).cwiseProduct(soft);
  if (reward) {
    y += *reward;
  }
  return y;
}

ProxyQLoss proxy_q_loss(
  const ParamSet & q, const Batch & batch, const Vector & y, double beta,
  ConservativeNormalization normalization)
{
  const Eigen::Index n = batch.size();
  if (y.size() != n || n == 0) {
    throw numeric::ShapeError("proxy_q_loss: target length must equal a nonempty batch");
  }
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (batch.intervened(j) > 0.5) {
      idx.push_back(j);
    }
  }
  const auto m = static_cast<Eigen::Index>(idx.size());

  Matrix actions(2, n + 2 * m);
  Matrix obs(batch.obs.rows(), n + 2 * m);
  actions.leftCols(n) = batch.executed;
  obs.leftCols(n) = batch.obs;
  for (Eigen::Index k = 0; k < m; ++k) {
    obs.col(n + k) = batch.obs.col(idx[k]);
    obs.col(n + m + k) = batch.obs.col(idx[k]);
    actions.col(n + k) = batch.agent_action.col(idx[k]);
    actions.col(n + m + k) = batch.expert_action.col(idx[k]);
  }

  numeric::ForwardTrace trace;
  const Matrix out = numeric::forward(q, critic_input(obs, actions), trace);

  ProxyQLoss r;
  r.intervened = m;
  Matrix dout = Matrix::Zero(1, out.cols());
  const Vector resid = out.row(0).head(n).transpose() - y;
  r.td_loss = resid.squaredNorm() / n;
  dout.row(0).head(n) = (2.0 / n) * resid.transpose();

  if (m > 0) {
    const double denom = normalization == ConservativeNormalization::kBatch ? n : m;
    double gap_sum = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      gap_sum += out(0, n + k) - out(0, n + m + k);
    }
    r.conservative = gap_sum / denom;
    r.q_gap = -gap_sum / m;
    dout.row(0).segment(n, m).setConstant(beta / denom);
    dout.row(0).segment(n + m, m).setConstant(-beta / denom);
  }
  r.loss = r.td_loss + beta * r.conservative;
  r.grad = q.zeros_like();
  numeric::backward(q, trace, dout, r.grad);
  return r;
}

ValueLoss qint_loss(
  const ParamSet & qint, const ParamSet & bootstrap, const Batch & batch,
  const Matrix & next_action, double gamma)
{
  const Eigen::Index n = batch.size();
  if (n == 0) {
    throw numeric::ShapeError("qint_loss: empty batch");
  }
  ValueLoss r;
  const Vector boot =
    numeric::forward(bootstrap, critic_input(batch.next_obs, next_action)).row(0).transpose();
  r.target = batch.cost + gamma * (Vector::Ones(n) - batch.terminal).cwiseProduct(boot);
  numeric::ForwardTrace trace;
  r.prediction =
    numeric::forward(qint, critic_input(batch.obs, batch.executed), trace).row(0).transpose();
  const Vector resid = r.prediction - r.target;
  r.loss = resid.squaredNorm() / n;
  r.grad = qint.zeros_like();
  numeric::backward(qint, trace, (2.0 / n) * resid.transpose(), r.grad);
  return r;
}

namespace
{

struct CriticPass
{
  numeric::ForwardTrace trace;
  Vector value;
};

CriticPass critic_pass(const ParamSet & q, const Matrix & in)
{
  CriticPass p;
  p.value = numeric::forward(q, in, p.trace).row(0).transpose();
  return p;
}

// sum_j weight_j * dQ(s_j, a_j)/da_j as a 2 x B matrix.
Matrix action_gradient(const ParamSet & q, const CriticPass & pass, const Vector & weight)
{
  ParamSet scratch = q.zeros_like();
  return numeric::backward(q, pass.trace, weight.transpose(), scratch).bottomRows(2);
}

}  // namespace

PolicyLoss policy_loss(
  const ParamSet & policy, const Matrix & obs, const Matrix & noise, const ParamSet & q1,
  const ParamSet & q2, const ParamSet * qint, double alpha)
{
  const Eigen::Index n = obs.cols();
  if (n == 0) {
    throw numeric::ShapeError("policy_loss: empty batch");
  }
  PolicyPass pass = policy_forward(policy, obs, noise);
  const auto & s = pass.sample;
  const Matrix in = critic_input(obs, s.action);

  const CriticPass p1 = critic_pass(q1, in);
  const CriticPass p2 = critic_pass(q2, in);
  Vector w1(n);
  Vector w2(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool first = p1.value(j) <= p2.value(j);
    w1(j) = first ? -1.0 / n : 0.0;
    w2(j) = first ? 0.0 : -1.0 / n;
  }
  Matrix da = action_gradient(q1, p1, w1) + action_gradient(q2, p2, w2);

  PolicyLoss r;
  r.mean_min_q = p1.value.cwiseMin(p2.value).mean();
  if (qint) {
    const CriticPass pi = critic_pass(*qint, in);
    da += action_gradient(*qint, pi, Vector::Constant(n, 1.0 / n));
    r.mean_qint = pi.value.mean();
  }
  r.log_prob = s.log_prob;
  r.mean_log_prob = s.log_prob.mean();
  r.loss = alpha * r.mean_log_prob - r.mean_min_q + r.mean_qint;

  const Matrix dhead = numeric::policy_head_backward(s, da, Vector::Constant(n, alpha / n));
  r.grad = policy.zeros_like();
  numeric::backward(policy, pass.trace, dhead, r.grad);
  return r;
}

double alpha_loss(double log_alpha, const Vector & log_prob, double target_entropy)
{
  return -std::exp(log_alpha) * (log_prob.array() + target_entropy).mean();
}

double alpha_gradient(double log_alpha, const Vector & log_prob, double target_entropy)
{
  // d/d(log a) of -a * c is -a * c
  return alpha_loss(log_alpha, log_prob, target_entropy);
}

BcLoss behavior_cloning_loss(const ParamSet & policy, const Matrix & obs, const Matrix & actions)
{
  const Eigen::Index n = obs.cols();
  if (n == 0 || actions.cols() != n) {
    throw numeric::ShapeError("behavior_cloning_loss: batch sizes differ or are empty");
  }
  numeric::ForwardTrace trace;
  const Matrix head = numeric::forward(policy, obs, trace);
  BcLoss r;
  r.loss = -numeric::squashed_gaussian_log_prob(head, actions).mean();
  const Matrix dhead =
    numeric::squashed_gaussian_log_prob_backward(head, actions, Vector::Constant(n, -1.0 / n));
  r.grad = policy.zeros_like();
  numeric::backward(policy, trace, dhead, r.grad);
  return r;
}

}  // namespace haco::learner
