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

#include "haco/harness/runner.hpp"

#include "haco/harness/demonstrations.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace haco::harness
{

namespace fs = std::filesystem;
using nlohmann::json;

void write_metrics_csv_header(std::ostream & out)
{
  out << "env_step,episode,map_seed,steps,takeover_rate,episodic_intervention_cost,"
         "safety_violations,cumulative_env_safety_violations,success,env_return,q_loss,td_loss,"
         "conservative,qint_loss,policy_loss,alpha_loss,alpha,entropy,q_gap\n";
}

void write_metrics_csv_row(std::ostream & out, const learner::EpisodeMetrics & m)
{
  const auto & d = m.diagnostics;
  const auto old = out.precision(17);
  out << m.env_step << ',' << m.episode << ',' << m.map_seed << ',' << m.steps << ','
      << m.takeover_rate << ',' << m.intervention_cost << ',' << m.safety_violations << ','
      << m.cumulative_safety_violations << ',' << (m.success ? 1 : 0) << ',' << m.env_return << ','
      << d.q_loss << ',' << d.td_loss << ',' << d.conservative << ',' << d.qint_loss << ','
      << d.policy_loss << ',' << d.alpha_loss << ',' << d.alpha << ',' << d.entropy << ','
      << d.q_gap << '\n';
  out.precision(old);
}

TakeoverDecay takeover_decay(const std::vector<learner::EpisodeMetrics> & episodes)
{
  if (episodes.empty()) {
    throw std::invalid_argument("takeover_decay: no episodes");
  }
  const std::size_t k = std::max<std::size_t>(1, episodes.size() / 10);
  TakeoverDecay t;
  for (std::size_t i = 0; i < k; ++i) {
    t.first += episodes[i].takeover_rate;
    t.last += episodes[episodes.size() - 1 - i].takeover_rate;
  }
  t.first /= static_cast<double>(k);
  t.last /= static_cast<double>(k);
  return t;
}

namespace
{

std::string hex(std::uint64_t v)
{
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

json eval_json(const EvalResult & e)
{
  return {
    {"success_rate", e.success_rate},
    {"mean_return", e.mean_return},
    {"mean_safety_violations", e.mean_safety_violations},
    {"episodes", e.rows.size()}};
}

struct Outputs
{
  fs::path dir;
  std::ofstream metrics;
  std::ofstream eval;

  bool enabled() const { return !dir.empty(); }
};

void open_outputs(Outputs & o, const RunConfig & cfg)
{
  if (cfg.output_dir.empty()) {
    return;
  }
  o.dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(o.dir);
  {
    std::ofstream c(o.dir / "config.json");
    c << to_json(cfg).dump(2) << '\n';
  }
  o.metrics.open(o.dir / "metrics.csv");
  o.eval.open(o.dir / "eval.csv");
  if (!o.metrics || !o.eval) {
    throw std::runtime_error("run: cannot write to " + o.dir.string());
  }
  write_metrics_csv_header(o.metrics);
  write_eval_csv_header(o.eval);
}

void record_eval(RunResult & r, Outputs & o, std::int64_t step, EvalResult e, const learner::LearnerState & state)
{
  if (o.enabled()) {
    write_eval_csv_rows(o.eval, step, e);
    o.eval.flush();
  }
  spdlog::info(
    "eval @ {}: success {:.2f} return {:.1f} violations {:.2f}", step, e.success_rate,
    e.mean_return, e.mean_safety_violations);
  if (!r.best_state || e.success_rate > r.best_eval.result.success_rate) {
    r.best_eval = {step, e};
    r.best_state = state;
  }
  r.evals.push_back({step, std::move(e)});
}

void finish(RunResult & r, Outputs & o, const RunConfig & cfg)
{
  if (!o.enabled()) {
    return;
  }
  learner::to_checkpoint(r.final_state, r.config_hash).save(o.dir / "checkpoint.bin");
  if (r.best_state) {
    learner::to_checkpoint(*r.best_state, r.config_hash).save(o.dir / "checkpoint_best.bin");
  }
  json s = {
    {"mode", to_string(cfg.mode)},
    {"config_hash", hex(r.config_hash)},
    {"env_steps", r.env_steps},
    {"episodes", r.episodes.size()},
    {"total_safety_violations", r.total_safety_violations},
    {"total_takeover_steps", r.total_takeover_steps},
    {"final_eval", eval_json(r.final_eval)},
    {"best_eval", eval_json(r.best_eval.result)},
    {"best_eval_env_step", r.best_eval.env_step}};
  if (!r.episodes.empty()) {
    const auto t = takeover_decay(r.episodes);
    s["takeover_rate_first_decile"] = t.first;
    s["takeover_rate_last_decile"] = t.last;
  }
  std::ofstream(o.dir / "summary.json") << s.dump(2) << '\n';
}

RunResult run_behavior_cloning(const RunConfig & cfg, Outputs & o, const MapList & train_maps, const MapList & test_maps)
{
  RunResult r;
  r.config_hash = config_hash(cfg);
  r.output_dir = o.dir;
  guardian::ScriptedGuardian expert(cfg.env, cfg.effective_guardian());
  Demonstrations demos;
  if (o.enabled()) {
    std::ofstream log(o.dir / "demos.jsonl");
    demos = record_demonstrations(expert, cfg.env, train_maps, cfg.demo_steps, &log);
  } else {
    demos = record_demonstrations(expert, cfg.env, train_maps, cfg.demo_steps);
  }
  r.env_steps = cfg.demo_steps;
  auto bc = train_behavior_cloning(demos, cfg.effective_train(), cfg.seed, cfg.bc_gradient_steps);
  spdlog::info("behavior cloning: {} samples, final loss {:.4f}", demos.size(), bc.final_loss);
  r.final_state = std::move(bc.state);
  r.final_eval = evaluate(
    policy_controller(r.final_state.policy), cfg.env, test_maps, cfg.test_map_seeds,
    cfg.eval_episodes_per_map);
  record_eval(r, o, r.env_steps, r.final_eval, r.final_state);
  return r;
}

}  // namespace

RunResult run(const RunConfig & cfg)
{
  cfg.validate();
  const auto gcfg = cfg.effective_guardian();
  const auto tcfg = cfg.effective_train();
  const MapList train_maps = make_maps(cfg.train_map_seeds, cfg.difficulty, cfg.env, gcfg);
  const MapList test_maps = make_maps(cfg.test_map_seeds, cfg.difficulty, cfg.env, gcfg);

  Outputs o;
  open_outputs(o, cfg);

  if (cfg.mode == Mode::kBehaviorCloning) {
    RunResult r = run_behavior_cloning(cfg, o, train_maps, test_maps);
    finish(r, o, cfg);
    return r;
  }

  RunResult r;
  r.config_hash = config_hash(cfg);
  r.output_dir = o.dir;

  learner::TrainerOptions options;
  options.zero_reward = cfg.zero_reward;
  options.safety_penalty = cfg.safety_penalty;
  std::unique_ptr<guardian::Guardian> guard;
  if (cfg.mode == Mode::kUnguardedRl) {
    options.reward_channel = learner::RewardChannel::kShaped;
    guard = std::make_unique<guardian::ConstantGuardian>(false, cfg.env, gcfg);
  } else {
    guard = std::make_unique<guardian::ScriptedGuardian>(cfg.env, gcfg);
  }
  learner::Trainer trainer(cfg.env, tcfg, train_maps, cfg.seed, options);

  auto eval_now = [&]() {
    return evaluate(
      policy_controller(trainer.learner().policy), cfg.env, test_maps, cfg.test_map_seeds,
      cfg.eval_episodes_per_map);
  };

  learner::TrainingHooks hooks;
  hooks.on_episode = [&](const learner::EpisodeMetrics & m) {
    if (o.enabled()) {
      write_metrics_csv_row(o.metrics, m);
    }
    r.episodes.push_back(m);
  };
  hooks.on_iteration = [&](std::int64_t iteration, const learner::Diagnostics &) {
    if (cfg.eval_every_iterations > 0 && iteration % cfg.eval_every_iterations == 0 &&
        trainer.env_steps() < cfg.total_env_steps)
    {
      record_eval(r, o, trainer.env_steps(), eval_now(), trainer.learner());
    }
  };
  learner::run_training(trainer, *guard, cfg.total_env_steps, hooks);

  r.env_steps = trainer.env_steps();
  r.total_safety_violations = trainer.cumulative_safety_violations();
  r.total_takeover_steps = trainer.total_takeover_steps();
  r.final_state = trainer.learner();
  r.final_eval = eval_now();
  record_eval(r, o, r.env_steps, r.final_eval, r.final_state);
  if (o.enabled()) {
    o.metrics.flush();
  }
  finish(r, o, cfg);
  return r;
}

EvalResult evaluate_checkpoint(
  const RunConfig & cfg, const fs::path & checkpoint, int episodes_per_map)
{
  cfg.validate();
  const auto ckpt = numeric::Checkpoint::load(checkpoint);
  if (ckpt.config_hash != config_hash(cfg)) {
    throw ConfigError(
      "checkpoint " + checkpoint.string() + " was written by config " + hex(ckpt.config_hash) +
      ", expected " + hex(config_hash(cfg)));
  }
  const auto state = learner::from_checkpoint(ckpt);
  const MapList maps =
    make_maps(cfg.test_map_seeds, cfg.difficulty, cfg.env, cfg.effective_guardian());
  return evaluate(
    policy_controller(state.policy), cfg.env, maps, cfg.test_map_seeds, episodes_per_map);
}

}  // namespace haco::harness
