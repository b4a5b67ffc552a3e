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

#include "haco/copilot/server.hpp"
#include "haco/copilot/session.hpp"
#include "haco/harness/demonstrations.hpp"
#include "haco/harness/evaluation.hpp"
#include "haco/harness/runner.hpp"
#include "haco/theory/risk.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace haco;

namespace
{

struct Common
{
  std::string config_path;
  std::string mode;
  std::string output;
  std::int64_t steps = -1;
  std::int64_t seed = -1;

  harness::RunConfig load() const
  {
    harness::RunConfig cfg = config_path.empty() ? harness::RunConfig{} : harness::load_run_config(config_path);
    if (!mode.empty()) {
      cfg.mode = harness::mode_from_string(mode);
    }
    if (!output.empty()) {
      cfg.output_dir = output;
    }
    if (steps >= 0) {
      cfg.total_env_steps = steps;
    }
    if (seed >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed);
    }
    return cfg;
  }
};

void add_common(CLI::App * app, Common & c)
{
  app->add_option("-c,--config", c.config_path, "run config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  app->add_option("--mode", c.mode, "haco | haco-ablation-a | haco-ablation-b | haco-ablation-c | unguarded-rl | behavior-cloning");
  app->add_option("--seed", c.seed, "learner seed");
}

std::ofstream open_out(const std::string & path)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  return out;
}

copilot::CopilotServer * g_server = nullptr;

void on_signal(int)
{
  if (g_server) {
    g_server->stop();
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"HACO: human-AI copilot optimization at desk scale"};
  app.require_subcommand(1);

  Common common;

  auto * config_cmd = app.add_subcommand("config", "print the effective run config as JSON");
  add_common(config_cmd, common);

  auto * train = app.add_subcommand("train", "run a training job and write its artifacts");
  add_common(train, common);
  train->add_option("-o,--output", common.output, "output directory (relative paths go under $HACO_OUTPUT_ROOT)");
  train->add_option("--steps", common.steps, "total env steps");
  bool zero_reward = false;
  train->add_flag("--zero-reward", zero_reward, "replace the env reward by zeros at the source");

  auto * eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test maps without guardian");
  add_common(eval, common);
  std::string checkpoint;
  int episodes = 0;
  std::string csv_path;
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "episodes per test map (config value when omitted)");
  eval->add_option("--csv", csv_path, "per-episode CSV");

  auto * verify = app.add_subcommand("verify-bound", "check the training-risk bound against a random agent");
  add_common(verify, common);
  theory::VerifyConfig vcfg;
  std::vector<double> noise_levels{0.0, 0.05, 0.1};
  int n_maps = 10;
  verify->add_option("--episodes", vcfg.n_episodes, "episodes per noise level");
  verify->add_option("--noise", noise_levels, "noise levels; each sets epsilon = kappa_lapse");
  verify->add_option("--maps", n_maps, "number of training maps to use");
  verify->add_option("--csv", csv_path, "output CSV (stdout when omitted)");

  auto * heat = app.add_subcommand("heatmap", "export a proxy-Q grid for one map");
  add_common(heat, common);
  std::uint64_t map_seed = 1000;
  int rows = 40;
  int cols = 40;
  double speed = 7.0;
  heat->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  heat->add_option("--map-seed", map_seed, "map seed");
  heat->add_option("--rows", rows, "grid rows");
  heat->add_option("--cols", cols, "grid columns");
  heat->add_option("--speed", speed, "speed of the placed car, m/s");
  heat->add_option("--csv", csv_path, "output CSV")->required();

  auto * demos = app.add_subcommand("record-demos", "record guardian-only demonstrations");
  add_common(demos, common);
  std::int64_t demo_steps = 10000;
  std::string demo_path;
  demos->add_option("--steps", demo_steps, "env steps to record");
  demos->add_option("--out", demo_path, "demonstration log (JSONL)")->required();

  auto * serve = app.add_subcommand("serve", "live copilot session over a websocket");
  add_common(serve, common);
  copilot::SessionConfig scfg;
  copilot::ServerOptions sopts;
  std::string log_path;
  std::string ckpt_out;
  double budget_ms = 20.0;
  serve->add_option("--address", sopts.address, "listen address");
  serve->add_option("--port", sopts.port, "listen port");
  serve->add_option("--tick-rate", scfg.tick_rate, "ticks per second");
  serve->add_option("--budget-ms", budget_ms, "learner update budget per tick");
  serve->add_option("--max-ticks", sopts.max_ticks, "stop after this many ticks (0 = until interrupted)");
  serve->add_option("--log", log_path, "session log (JSONL)")->required();
  serve->add_option("--checkpoint-out", ckpt_out, "checkpoint written when the session ends");

  auto * replay = app.add_subcommand("replay", "re-execute a recorded session");
  add_common(replay, common);
  replay->add_option("--log", log_path, "session log")->required()->check(CLI::ExistingFile);
  replay->add_option("--checkpoint-out", ckpt_out, "checkpoint of the replayed learner");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = common.load();
    if (*config_cmd) {
      std::cout << harness::to_json(cfg).dump(2) << '\n';
    } else if (*train) {
      cfg.zero_reward = zero_reward || cfg.zero_reward;
      const auto r = harness::run(cfg);
      std::cout << "final success " << r.final_eval.success_rate << ", best " << r.best_eval.result.success_rate
                << " at step " << r.best_eval.env_step << ", training safety violations "
                << r.total_safety_violations << '\n';
      if (!r.output_dir.empty()) {
        std::cout << "artifacts in " << r.output_dir.string() << '\n';
      }
    } else if (*eval) {
      const auto e = harness::evaluate_checkpoint(cfg, checkpoint, episodes > 0 ? episodes : cfg.eval_episodes_per_map);
      if (!csv_path.empty()) {
        auto out = open_out(csv_path);
        harness::write_eval_csv_header(out);
        harness::write_eval_csv_rows(out, 0, e);
      }
      std::cout << "success_rate " << e.success_rate << "\nmean_return " << e.mean_return
                << "\nmean_safety_violations " << e.mean_safety_violations << '\n';
    } else if (*verify) {
      const std::vector<std::uint64_t> seeds(cfg.train_map_seeds.begin(), cfg.train_map_seeds.begin() + std::min<std::size_t>(n_maps, cfg.train_map_seeds.size()));
      const auto maps = harness::make_maps(seeds, cfg.difficulty, cfg.env, cfg.guardian);
      std::vector<guardian::NoiseConfig> configs;
      for (std::size_t i = 0; i < noise_levels.size(); ++i) {
        configs.push_back({noise_levels[i], noise_levels[i], 100 + i});
      }
      guardian::ScriptedGuardian base(cfg.env, cfg.guardian);
      const auto reports = theory::verify_bound(base, cfg.env, maps, configs, vcfg);
      std::ofstream file;
      if (!csv_path.empty()) {
        file = open_out(csv_path);
      }
      std::ostream & out = csv_path.empty() ? std::cout : file;
      theory::write_risk_csv_header(out);
      for (const auto & r : reports) {
        theory::write_risk_csv_row(out, r);
      }
    } else if (*heat) {
      const auto ckpt = numeric::Checkpoint::load(checkpoint);
      if (ckpt.config_hash != harness::config_hash(cfg)) {
        throw harness::ConfigError("checkpoint does not belong to this config");
      }
      const auto state = learner::from_checkpoint(ckpt);
      const std::vector<std::uint64_t> seeds{map_seed};
      const auto maps = harness::make_maps(seeds, cfg.difficulty, cfg.env, cfg.guardian);
      auto out = open_out(csv_path);
      harness::export_q_heatmap(state, *maps.front(), cfg.env, rows, cols, speed, out);
    } else if (*demos) {
      const auto maps = harness::make_maps(cfg.train_map_seeds, cfg.difficulty, cfg.env, cfg.guardian);
      guardian::ScriptedGuardian g(cfg.env, cfg.guardian);
      auto out = open_out(demo_path);
      const auto d = harness::record_demonstrations(g, cfg.env, maps, demo_steps, &out);
      std::cout << d.size() << " transitions written to " << demo_path << '\n';
    } else if (*serve) {
      scfg.update_budget = std::chrono::microseconds(static_cast<std::int64_t>(budget_ms * 1000.0));
      auto log = open_out(log_path);
      copilot::SessionCore core(cfg, scfg, &log);
      copilot::CopilotServer server(core, scfg, sopts);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("listening on ws://{}:{}", sopts.address, server.port());
      server.run();
      g_server = nullptr;
      if (!ckpt_out.empty()) {
        learner::to_checkpoint(core.trainer().learner(), harness::config_hash(cfg)).save(ckpt_out);
      }
      const auto c = core.counters();
      std::cout << c.ticks << " ticks, " << c.stale_inputs << " stale inputs, " << c.input_drops
                << " input drops, " << c.frame_drops << " frame drops\n";
    } else if (*replay) {
      std::ifstream in(log_path);
      const auto log = copilot::read_session_log(in);
      const auto trainer = copilot::replay_session(log, cfg);
      if (!ckpt_out.empty()) {
        learner::to_checkpoint(trainer->learner(), harness::config_hash(cfg)).save(ckpt_out);
      }
      std::cout << log.entries.size() << " ticks replayed, " << trainer->buffer().size()
                << " transitions, " << trainer->learner().gradient_steps << " gradient steps\n";
    }
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
