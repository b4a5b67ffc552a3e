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

#include "haco/copilot/session.hpp"

#include "haco/harness/evaluation.hpp"
#include "haco/numeric/checkpoint.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace haco::copilot
{

using nlohmann::json;

namespace
{

std::string hex(std::uint64_t v)
{
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t parse_hex(const std::string & s)
{
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos, 16);
  if (pos != s.size()) {
    throw SessionLogError("bad hex value '" + s + "'");
  }
  return v;
}

json pair(const env::Action & a) { return json::array({a(0), a(1)}); }

env::Action read_pair(const json & j)
{
  if (!j.is_array() || j.size() != 2) {
    throw SessionLogError("session log: expected a [steering, throttle] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void write_session_header(std::ostream & out, const harness::RunConfig & cfg)
{
  out << json{{"v", kSessionLogVersion}, {"type", "session"}, {"config_hash", hex(harness::config_hash(cfg))}, {"config", harness::to_json(cfg)}}.dump()
      << '\n';
}

void write_session_entry(std::ostream & out, const SessionLogEntry & e)
{
  json j = {
    {"tick", e.tick},
    {"frame_digest", hex(e.frame_digest)},
    {"input", e.input ? to_json(*e.input) : json(nullptr)},
    {"agent_action", pair(e.agent_action)},
    {"takeover", e.takeover},
    {"applied", pair(e.applied)},
    {"rising_cost", e.rising_cost},
    {"updates", e.updates}};
  out << j.dump() << '\n';
}

SessionLog read_session_log(std::istream & in)
{
  std::string line;
  if (!std::getline(in, line)) {
    throw SessionLogError("session log: missing header");
  }
  SessionLog log;
  try {
    const json h = json::parse(line);
    if (h.at("type") != "session") {
      throw SessionLogError("session log: wrong header type");
    }
    if (h.at("v").get<int>() != kSessionLogVersion) {
      throw SessionLogError("session log: unsupported version");
    }
    log.config_hash = parse_hex(h.at("config_hash").get<std::string>());
    log.config = h.at("config");
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      const json j = json::parse(line);
      SessionLogEntry e;
      e.tick = j.at("tick").get<std::int64_t>();
      e.frame_digest = parse_hex(j.at("frame_digest").get<std::string>());
      if (!j.at("input").is_null()) {
        const auto m = parse_message(j.at("input").dump());
        e.input = std::get<InputMsg>(m);
      }
      e.agent_action = read_pair(j.at("agent_action"));
      e.takeover = j.at("takeover").get<bool>();
      e.applied = read_pair(j.at("applied"));
      e.rising_cost = j.at("rising_cost").get<double>();
      e.updates = j.at("updates").get<int>();
      if (!log.entries.empty() && e.tick <= log.entries.back().tick) {
        throw SessionLogError("session log: ticks must increase");
      }
      log.entries.push_back(std::move(e));
    }
  } catch (const json::exception & e) {
    throw SessionLogError(std::string("session log: ") + e.what());
  } catch (const ProtocolError & e) {
    throw SessionLogError(std::string("session log: ") + e.what());
  }
  return log;
}

std::unique_ptr<learner::Trainer> make_session_trainer(const harness::RunConfig & cfg)
{
  cfg.validate();
  const auto maps = harness::make_maps(cfg.train_map_seeds, cfg.difficulty, cfg.env, cfg.effective_guardian());
  return std::make_unique<learner::Trainer>(cfg.env, cfg.effective_train(), maps, cfg.seed);
}

SessionCore::SessionCore(const harness::RunConfig & cfg, SessionConfig scfg, std::ostream * log)
: cfg_(cfg),
  scfg_(scfg),
  log_(log),
  trainer_(make_session_trainer(cfg)),
  inputs_(scfg.queue_capacity),
  frames_(scfg.queue_capacity)
{
  if (log_) {
    write_session_header(*log_, cfg_);
  }
}

void SessionCore::submit_input(const InputMsg & msg) { inputs_.push(msg); }

void SessionCore::set_connected(bool connected) { connected_ = connected; }

bool SessionCore::connected() const { return connected_; }

SessionCounters SessionCore::counters() const
{
  SessionCounters c = counters_;
  c.input_drops = inputs_.dropped();
  c.frame_drops = frames_.dropped();
  return c;
}

std::optional<FrameMsg> SessionCore::tick()
{
  if (!connected_) {
    ++counters_.paused_ticks;
    return std::nullopt;
  }
  for (auto & in : inputs_.drain()) {
    if (in.tick < tick_ - 1) {
      ++counters_.stale_inputs;
      continue;
    }
    if (!held_ || in.tick >= held_->tick) {
      held_ = in;
    }
  }

  auto & tr = *trainer_;
  SessionLogEntry e;
  e.tick = tick_;
  e.input = held_;
  e.takeover = held_ && held_->takeover;
  e.agent_action = tr.propose();
  guardian::GuardianDecision decision;
  if (e.takeover) {
    decision.intervene = true;
    decision.expert_action = env::Action(held_->steering, held_->throttle);
  }
  const auto rec = tr.commit(e.agent_action, decision);
  e.agent_action = rec.agent_action;
  e.applied = rec.applied;
  e.rising_cost = rec.rising_cost;

  const auto deadline = std::chrono::steady_clock::now() + scfg_.update_budget;
  while (tr.pending_updates() > 0) {
    const bool go = update_gate ? update_gate(e.updates) : std::chrono::steady_clock::now() < deadline;
    if (!go) {
      break;
    }
    trainer_->run_updates(1);
    ++e.updates;
  }
  counters_.deferred_updates = tr.pending_updates();

  FrameStats stats;
  stats.steps = tr.episode_steps();
  stats.takeover_rate = stats.steps > 0 ? static_cast<double>(tr.episode_takeover_steps()) / stats.steps : 0.0;
  stats.intervention_cost = tr.episode_intervention_cost();
  stats.total_steps = tr.env_steps();
  FrameMsg frame = make_frame(
    tr.env(), tick_, tr.episodes(), e.agent_action, e.applied, e.takeover, stats,
    scfg_.max_centerline_points);
  e.frame_digest = numeric::fnv1a64(to_json(frame).dump());

  if (log_) {
    write_session_entry(*log_, e);
    log_->flush();
  }
  entries_.push_back(e);
  ++tick_;
  ++counters_.ticks;
  frames_.push(frame);
  return frame;
}

std::unique_ptr<learner::Trainer> replay_session(const SessionLog & log, const harness::RunConfig & cfg)
{
  const auto hash = harness::config_hash(cfg);
  if (hash != log.config_hash) {
    throw harness::ConfigError(
      "session was recorded with config " + hex(log.config_hash) + ", got " + hex(hash));
  }
  auto trainer = make_session_trainer(cfg);
  for (const auto & e : log.entries) {
    const env::Action a = trainer->propose();
    if (a != e.agent_action) {
      throw SessionLogError("replay diverged at tick " + std::to_string(e.tick) + ": agent action differs");
    }
    guardian::GuardianDecision decision;
    if (e.takeover) {
      if (!e.input) {
        throw SessionLogError("takeover without input at tick " + std::to_string(e.tick));
      }
      decision.intervene = true;
      decision.expert_action = env::Action(e.input->steering, e.input->throttle);
    }
    const auto rec = trainer->commit(a, decision);
    if (rec.applied != e.applied || rec.rising_cost != e.rising_cost) {
      throw SessionLogError("replay diverged at tick " + std::to_string(e.tick));
    }
    for (int i = 0; i < e.updates; ++i) {
      trainer->run_updates(1);
    }
  }
  return trainer;
}

}  // namespace haco::copilot
