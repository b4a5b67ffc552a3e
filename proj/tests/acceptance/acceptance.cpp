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

// Acceptance suite. Prints one PASS/FAIL line per
// criterion and a summary; the exit status reflects only whether the suite
// ran to completion.

#include "haco/guardian/guardian.hpp"
#include "haco/harness/evaluation.hpp"
#include "haco/harness/runner.hpp"
#include "haco/learner/losses.hpp"
#include "haco/theory/risk.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace haco;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
  bool pass = false;
  std::string detail;
};

using numeric::Matrix;
using numeric::ParamSet;
using numeric::Vector;

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 & rng, double scale = 1.0)
{
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = n(rng);
  }
  return m;
}

std::vector<double> fd_gradient(const ParamSet & params, const std::function<double(const ParamSet &)> & loss)
{
  constexpr double h = 1e-6;
  std::vector<double> flat = numeric::flatten(params);
  std::vector<double> grad(flat.size());
  ParamSet probe = params;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double x = flat[i];
    flat[i] = x + h;
    numeric::unflatten(flat, probe);
    const double up = loss(probe);
    flat[i] = x - h;
    numeric::unflatten(flat, probe);
    const double down = loss(probe);
    flat[i] = x;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const std::vector<double> & a, const std::vector<double> & b)
{
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

learner::Batch random_batch(Eigen::Index obs_dim, Eigen::Index n, std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  learner::Batch b;
  b.obs = random_matrix(obs_dim, n, rng);
  b.next_obs = random_matrix(obs_dim, n, rng);
  b.agent_action = random_matrix(2, n, rng).array().tanh();
  b.expert_action = random_matrix(2, n, rng).array().tanh();
  b.intervened.resize(n);
  b.cost.resize(n);
  b.terminal.resize(n);
  b.executed = b.agent_action;
  for (Eigen::Index i = 0; i < n; ++i) {
    b.intervened(i) = u(rng) > 0.0 ? 1.0 : 0.0;
    b.cost(i) = b.intervened(i) > 0.0 ? 1.0 + u(rng) : 0.0;
    b.terminal(i) = u(rng) > 0.7 ? 1.0 : 0.0;
    if (b.intervened(i) > 0.0) {
      b.executed.col(i) = b.expert_action.col(i);
    } else {
      b.expert_action.col(i).setZero();
    }
  }
  b.slots.resize(static_cast<std::size_t>(n));
  return b;
}

ParamSet random_net(std::vector<int> sizes, std::mt19937_64 & rng)
{
  return numeric::make_mlp(sizes, numeric::Activation::kTanh, rng);
}

Outcome criterion_1()
{
  using learner::intervention_cost;
  const double e1 = std::abs(intervention_cost({0.3, -0.7}, {0.3, -0.7}).value - 0.0);
  const double e2 = std::abs(intervention_cost({0.5, 0.5}, {-0.5, -0.5}).value - 2.0);
  const double e3 = std::abs(intervention_cost({1.0, 0.0}, {0.0, 1.0}).value - 1.0);
  const double e4 = std::abs(intervention_cost({0.6, 0.8}, {1.0, 0.0}).value - 0.4);
  const double worst = std::max({e1, e2, e3, e4});
  return {worst <= 1e-12, fmt::format("max abs error {:.3g}", worst)};
}

Outcome criterion_2()
{
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_real_distribution<double> p_on(0.05, 0.95);
  std::int64_t runs = 0;
  std::int64_t bad = 0;
  for (int seq = 0; seq < 100000; ++seq) {
    const int n = len(rng);
    const double p = p_on(rng);
    bool prev = false;
    for (int t = 0; t < n; ++t) {
      const bool on = u(rng) < 2.0 * p - 1.0;
      const double raw = on ? learner::intervention_cost({u(rng), u(rng)}, {u(rng), u(rng)}).value : 0.0;
      const double c = learner::rising_edge_cost(on, prev, raw);
      const bool first = on && !prev;
      runs += first ? 1 : 0;
      if (first ? c == 0.0 : c != 0.0) {
        ++bad;
      }
      prev = on;
    }
  }
  return {bad == 0, fmt::format("{} takeover runs, {} misplaced costs", runs, bad)};
}

Outcome criterion_3()
{
  constexpr int kConfigs = 100;
  double worst_proxy = 0.0;
  double worst_qint = 0.0;
  double worst_policy = 0.0;
  for (int k = 0; k < kConfigs; ++k) {
    std::mt19937_64 rng(7000 + k);
    std::uniform_int_distribution<int> obs_dim(2, 8);
    std::uniform_int_distribution<int> hidden(3, 8);
    std::uniform_int_distribution<int> batch(2, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int d = obs_dim(rng);
    const int n = batch(rng);
    const int h = hidden(rng);
    const auto b = random_batch(d, n, rng);
    const auto q = random_net({d + 2, h, h, 1}, rng);
    const auto q2 = random_net({d + 2, h, 1}, rng);
    const auto qint = random_net({d + 2, h, 1}, rng);
    const auto policy = random_net({d, h, 4}, rng);
    const double beta = 20.0 * unit(rng);
    const double alpha = unit(rng);
    const double gamma = 0.5 + 0.49 * unit(rng);
    const auto norm = k % 2 == 0 ? learner::ConservativeNormalization::kBatch : learner::ConservativeNormalization::kIntervened;

    const Vector y = random_matrix(n, 1, rng).col(0);
    const auto pq = learner::proxy_q_loss(q, b, y, beta, norm);
    worst_proxy = std::max(worst_proxy, relative_error(numeric::flatten(pq.grad), fd_gradient(q, [&](const ParamSet & p) { return learner::proxy_q_loss(p, b, y, beta, norm).loss; })));

    const Matrix next_action = random_matrix(2, n, rng).array().tanh();
    const auto qi = learner::qint_loss(qint, q2, b, next_action, gamma);
    worst_qint = std::max(worst_qint, relative_error(numeric::flatten(qi.grad), fd_gradient(qint, [&](const ParamSet & p) { return learner::qint_loss(p, q2, b, next_action, gamma).loss; })));

    const Matrix noise = random_matrix(2, n, rng);
    const ParamSet * qi_ptr = k % 3 == 0 ? nullptr : &qint;
    const auto pl = learner::policy_loss(policy, b.obs, noise, q, q2, qi_ptr, alpha);
    worst_policy = std::max(worst_policy, relative_error(numeric::flatten(pl.grad), fd_gradient(policy, [&](const ParamSet & p) { return learner::policy_loss(p, b.obs, noise, q, q2, qi_ptr, alpha).loss; })));
  }
  const double worst = std::max({worst_proxy, worst_qint, worst_policy});
  return {worst < 1e-4, fmt::format("{} configs per loss; max relative error proxy {:.2e}, q_int {:.2e}, policy {:.2e}", kConfigs, worst_proxy, worst_qint, worst_policy)};
}

Outcome criterion_4()
{
  const double v = theory::risk_bound({0.01, 0.05, 2.0, 0.99});
  bool monotone = true;
  const double eps[] = {0.0, 0.01, 0.05, 0.2};
  const double kap[] = {0.0, 0.02, 0.1, 0.3};
  const double kp[] = {0.0, 0.5, 2.0, 4.0};
  const double gam[] = {0.0, 0.5, 0.9, 0.99};
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) {
          const double base = theory::risk_bound({eps[a], kap[b], kp[c], gam[d]});
          if (a < 3) monotone = monotone && theory::risk_bound({eps[a + 1], kap[b], kp[c], gam[d]}) >= base;
          if (b < 3) monotone = monotone && theory::risk_bound({eps[a], kap[b + 1], kp[c], gam[d]}) >= base;
          if (c < 3) monotone = monotone && theory::risk_bound({eps[a], kap[b], kp[c + 1], gam[d]}) >= base;
          if (d < 3) monotone = monotone && theory::risk_bound({eps[a], kap[b], kp[c], gam[d + 1]}) >= base;
        }
      }
    }
  }
  const bool exact = std::abs(v - 7.98) <= 1e-9;
  return {exact && monotone, fmt::format("risk_bound(0.01, 0.05, 2, 0.99) = {:.12f}; monotone on 4^4 grid: {}", v, monotone ? "yes" : "no")};
}

Outcome criterion_5(const harness::RunConfig & base)
{
  std::vector<std::uint64_t> seeds(base.train_map_seeds.begin(), base.train_map_seeds.begin() + std::min<std::size_t>(10, base.train_map_seeds.size()));
  const auto maps = harness::make_maps(seeds, base.difficulty, base.env, base.guardian);
  guardian::ScriptedGuardian g(base.env, base.guardian);
  const std::vector<guardian::NoiseConfig> configs{{0.0, 0.0, 101}, {0.05, 0.05, 102}, {0.1, 0.1, 103}};
  theory::VerifyConfig vc;
  vc.n_episodes = 200;
  vc.gamma = 0.99;
  const auto reports = theory::verify_bound(g, base.env, maps, configs, vc);
  bool ok = true;
  std::string detail;
  for (const auto & r : reports) {
    ok = ok && r.within_interval;
    detail += fmt::format("(eps {:.2f}, kappa {:.2f}): V {:.3f} +- {:.3f} vs bound {:.3f}; ", r.noise.epsilon, r.noise.kappa_lapse, r.v_hat, r.half_width, r.bound);
  }
  return {ok, detail};
}

struct Runs
{
  harness::RunResult haco;
  harness::RunResult repeat;
  harness::RunResult zero_reward;
  harness::RunResult rl;
  harness::RunResult ablation_b;
  harness::RunResult ablation_c;
};

harness::RunResult timed_run(harness::RunConfig cfg, const fs::path & dir, const std::string & name)
{
  cfg.output_dir = (dir / name).string();
  const auto t0 = std::chrono::steady_clock::now();
  auto r = harness::run(cfg);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << fmt::format("  run {:<12} {:>6} steps in {:6.0f} s, final success {:.2f}, best {:.2f} @ {}", name, r.env_steps, s, r.final_eval.success_rate, r.best_eval.result.success_rate, r.best_eval.env_step) << std::endl;
  return r;
}

void print(int id, const std::string & title, const Outcome & o, int & passed)
{
  passed += o.pass ? 1 : 0;
  std::cout << fmt::format("[{}] criterion {:>2} {}: {}", o.pass ? "PASS" : "FAIL", id, title, o.detail) << std::endl;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"HACO acceptance suite"};
  std::string out_dir = (fs::temp_directory_path() / "haco_acceptance").string();
  std::set<int> only;
  std::int64_t steps = 30000;
  app.add_option("--output-dir", out_dir, "where training runs are written");
  app.add_option("--only", only, "run just these criteria");
  app.add_option("--steps", steps, "env steps per training run");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
  int passed = 0;
  int ran = 0;
  try {
    if (want(1)) { ++ran; print(1, "cosine cost exactness", criterion_1(), passed); }
    if (want(2)) { ++ran; print(2, "rising-edge rule", criterion_2(), passed); }
    if (want(3)) { ++ran; print(3, "gradient fidelity", criterion_3(), passed); }
    if (want(4)) { ++ran; print(4, "risk bound arithmetic", criterion_4(), passed); }

    harness::RunConfig cfg;
    cfg.total_env_steps = steps;
    cfg.eval_episodes_per_map = 1;
    if (want(5)) { ++ran; print(5, "risk bound empirical", criterion_5(cfg), passed); }

    const bool need_runs = want(6) || want(7) || want(8) || want(9) || want(10) || want(11) || want(12);
    if (need_runs) {
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      Runs runs;
      runs.haco = timed_run(cfg, dir, "haco");
      if (want(6)) {
        auto c = cfg;
        c.mode = harness::Mode::kUnguardedRl;
        runs.rl = timed_run(c, dir, "unguarded-rl");
        const double ratio = runs.rl.total_safety_violations > 0 ? static_cast<double>(runs.haco.total_safety_violations) / runs.rl.total_safety_violations : 1.0;
        ++ran;
        print(6, "training safety vs unguarded", {runs.rl.total_safety_violations > 0 && ratio <= 0.1, fmt::format("haco {} vs unguarded-rl {} violations (ratio {:.4f}, need <= 0.1)", runs.haco.total_safety_violations, runs.rl.total_safety_violations, ratio)}, passed);
      }
      if (want(7)) {
        const auto & b = runs.haco.best_eval;
        ++ran;
        print(7, "sample efficiency", {b.result.success_rate >= 0.7 && b.env_step <= 50000, fmt::format("best test success {:.2f} at {} steps (final {:.2f}); need >= 0.70 within 50000", b.result.success_rate, b.env_step, runs.haco.final_eval.success_rate)}, passed);
      }
      if (want(8)) {
        const auto t = harness::takeover_decay(runs.haco.episodes);
        ++ran;
        print(8, "takeover-rate decay", {t.last <= 0.5 * t.first, fmt::format("first decile {:.3f}, last decile {:.3f} over {} episodes", t.first, t.last, runs.haco.episodes.size())}, passed);
      }
      if (want(9)) {
        const auto test_maps = harness::make_maps(cfg.test_map_seeds, cfg.difficulty, cfg.env, cfg.effective_guardian());
        guardian::ScriptedGuardian g(cfg.env, cfg.effective_guardian());
        const auto samples = harness::collect_interventions(runs.haco.final_state.policy, g, cfg.env, test_maps, 300, 200000, 77);
        const double gap = samples.empty() ? 0.0 : harness::mean_q_gap(runs.haco.final_state, samples);
        const double batch_gap = runs.haco.episodes.empty() ? 0.0 : runs.haco.episodes.back().diagnostics.q_gap;
        ++ran;
        print(9, "conservative ordering", {samples.size() >= 200 && gap > 0.0, fmt::format("mean Q(s,a_h) - Q(s,a_n) = {:.3f} over {} held-out interventions (last training batch: {:.3f})", gap, samples.size(), batch_gap)}, passed);
      }
      if (want(10)) {
        auto c = cfg;
        c.mode = harness::Mode::kAblationC;
        runs.ablation_c = timed_run(c, dir, "ablation-c");
        c.mode = harness::Mode::kAblationB;
        runs.ablation_b = timed_run(c, dir, "ablation-b");
        const double full = runs.haco.best_eval.result.success_rate;
        const double sc = runs.ablation_c.best_eval.result.success_rate;
        const double sb = runs.ablation_b.best_eval.result.success_rate;
        ++ran;
        print(10, "ablations", {sc <= 0.2 * full && sb <= 0.5 * full, fmt::format("best success: haco {:.2f}, no q_int {:.2f} (need <= {:.2f}), constant cost {:.2f} (need <= {:.2f}); final: {:.2f} / {:.2f} / {:.2f}", full, sc, 0.2 * full, sb, 0.5 * full, runs.haco.final_eval.success_rate, runs.ablation_c.final_eval.success_rate, runs.ablation_b.final_eval.success_rate)}, passed);
      }
      if (want(11)) {
        runs.repeat = timed_run(cfg, dir, "haco-repeat");
        const bool metrics = slurp(runs.haco.output_dir / "metrics.csv") == slurp(runs.repeat.output_dir / "metrics.csv");
        const bool ckpt = slurp(runs.haco.output_dir / "checkpoint.bin") == slurp(runs.repeat.output_dir / "checkpoint.bin");
        ++ran;
        print(11, "determinism", {metrics && ckpt, fmt::format("metrics.csv identical: {}, checkpoint identical: {}", metrics, ckpt)}, passed);
      }
      if (want(12)) {
        auto c = cfg;
        c.zero_reward = true;
        runs.zero_reward = timed_run(c, dir, "haco-zero-reward");
        const bool ckpt = slurp(runs.haco.output_dir / "checkpoint.bin") == slurp(runs.zero_reward.output_dir / "checkpoint.bin");
        ++ran;
        print(12, "reward-free guarantee", {ckpt, fmt::format("checkpoint identical with zeroed reward: {}", ckpt)}, passed);
      }
    }
  } catch (const std::exception & e) {
    std::cout << "acceptance suite aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << fmt::format("acceptance: {}/{} criteria passed", passed, ran) << std::endl;
  return 0;
}
