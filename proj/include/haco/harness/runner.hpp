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

#ifndef HACO__HARNESS__RUNNER_HPP_
#define HACO__HARNESS__RUNNER_HPP_

#include "haco/harness/evaluation.hpp"
#include "haco/harness/run_config.hpp"
#include "haco/learner/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace haco::harness
{

struct PeriodicEval
{
  std::int64_t env_step = 0;
  EvalResult result;
};

struct RunResult
{
  std::vector<learner::EpisodeMetrics> episodes;
  std::vector<PeriodicEval> evals;  // periodic evaluations, then the final one
  EvalResult final_eval;
  /// Highest success rate seen (ties keep the earlier one).
  PeriodicEval best_eval;
  learner::LearnerState final_state;
  std::optional<learner::LearnerState> best_state;
  std::int64_t env_steps = 0;
  std::int64_t total_safety_violations = 0;
  std::int64_t total_takeover_steps = 0;
  std::uint64_t config_hash = 0;
  std::filesystem::path output_dir;  // empty when nothing was written
};

/// Runs the configured mode. When cfg.output_dir is non-empty it is resolved
/// with resolve_output_dir() and receives config.json, metrics.csv, eval.csv,
/// checkpoint.bin, checkpoint_best.bin and summary.json (plus demos.jsonl in
/// behavior-cloning mode). Throws ConfigError before touching the filesystem.
RunResult run(const RunConfig & cfg);

void write_metrics_csv_header(std::ostream & out);
void write_metrics_csv_row(std::ostream & out, const learner::EpisodeMetrics & m);

/// Mean takeover rate over the first and the last tenth of `episodes`
/// (at least one episode each).
struct TakeoverDecay
{
  double first = 0.0;
  double last = 0.0;
};
TakeoverDecay takeover_decay(const std::vector<learner::EpisodeMetrics> & episodes);

/// Loads a checkpoint written by run() for `cfg` and evaluates its policy on
/// the configured test maps. Throws ConfigError when the checkpoint was
/// produced by a different config.
EvalResult evaluate_checkpoint(
  const RunConfig & cfg, const std::filesystem::path & checkpoint, int episodes_per_map);

}  // namespace haco::harness

#endif  // HACO__HARNESS__RUNNER_HPP_
