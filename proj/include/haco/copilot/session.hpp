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

#ifndef HACO__COPILOT__SESSION_HPP_
#define HACO__COPILOT__SESSION_HPP_

#include "haco/copilot/protocol.hpp"
#include "haco/harness/run_config.hpp"
#include "haco/learner/trainer.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace haco::copilot
{

inline constexpr int kSessionLogVersion = 1;

/// Fixed-capacity FIFO shared between threads. A push into a full queue
/// discards the oldest element and counts it.
template <class T>
class BoundedQueue
{
public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  void push(T value)
  {
    {
      std::lock_guard lock(mutex_);
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  std::optional<T> try_pop()
  {
    std::lock_guard lock(mutex_);
    if (items_.empty()) {
      return std::nullopt;
    }
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::optional<T> pop_for(std::chrono::milliseconds timeout)
  {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty(); })) {
      return std::nullopt;
    }
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::vector<T> drain()
  {
    std::lock_guard lock(mutex_);
    std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  std::size_t size() const
  {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

  std::uint64_t dropped() const
  {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
};

struct SessionConfig
{
  double tick_rate = 10.0;  // Hz
  std::chrono::microseconds update_budget{20000};
  std::size_t queue_capacity = 64;
  std::size_t max_centerline_points = 256;
};

/// One tick of a session as recorded in the log.
struct SessionLogEntry
{
  std::int64_t tick = 0;
  std::uint64_t frame_digest = 0;    // FNV-1a of the emitted frame's JSON
  std::optional<InputMsg> input;     // the input in force, if any was received
  env::Action agent_action = env::Action::Zero();
  bool takeover = false;
  env::Action applied = env::Action::Zero();
  double rising_cost = 0.0;
  int updates = 0;  // gradient steps run after this tick
};

struct SessionLog
{
  std::uint64_t config_hash = 0;
  nlohmann::json config;
  std::vector<SessionLogEntry> entries;
};

class SessionLogError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

void write_session_header(std::ostream & out, const harness::RunConfig & cfg);
void write_session_entry(std::ostream & out, const SessionLogEntry & e);
SessionLog read_session_log(std::istream & in);

struct SessionCounters
{
  std::int64_t ticks = 0;
  std::int64_t paused_ticks = 0;
  std::uint64_t stale_inputs = 0;
  std::uint64_t input_drops = 0;
  std::uint64_t frame_drops = 0;
  std::int64_t deferred_updates = 0;  // pending gradient steps left over after the budget ran out
};

/// The tick loop of a live session. Inputs arrive through submit_input()
/// from any thread; everything else belongs to the thread that calls tick().
/// Each tick takes the freshest input that acknowledges the previous frame or
/// a later one, applies it (a takeover makes the input the expert action),
/// runs queued learner updates until the time budget is spent, logs the tick
/// and queues the resulting frame.
class SessionCore
{
public:
  SessionCore(const harness::RunConfig & cfg, SessionConfig scfg, std::ostream * log = nullptr);

  void submit_input(const InputMsg & msg);
  void set_connected(bool connected);
  bool connected() const;

  /// Advances one tick. Returns no frame (and changes nothing) while paused.
  std::optional<FrameMsg> tick();

  /// Frames produced by tick(), for the transport.
  BoundedQueue<FrameMsg> & frames() { return frames_; }

  /// Overrides the budget check for tests: called before each gradient step,
  /// returning false stops the updates for this tick.
  std::function<bool(int steps_done)> update_gate;

  const learner::Trainer & trainer() const { return *trainer_; }
  SessionCounters counters() const;
  std::int64_t next_tick() const { return tick_; }
  const std::vector<SessionLogEntry> & entries() const { return entries_; }

private:
  harness::RunConfig cfg_;
  SessionConfig scfg_;
  std::ostream * log_;
  std::unique_ptr<learner::Trainer> trainer_;
  BoundedQueue<InputMsg> inputs_;
  BoundedQueue<FrameMsg> frames_;
  std::atomic<bool> connected_{false};
  std::optional<InputMsg> held_;
  std::int64_t tick_ = 0;
  SessionCounters counters_;
  std::vector<SessionLogEntry> entries_;
};

/// Trainer used by live sessions and replays: HACO learner settings from the
/// config, maps from its train seeds, reward channel off.
std::unique_ptr<learner::Trainer> make_session_trainer(const harness::RunConfig & cfg);

/// Re-executes a recorded session. Throws harness::ConfigError when `cfg`
/// does not hash to the recorded config and SessionLogError when the
/// recomputed stream diverges from the log.
std::unique_ptr<learner::Trainer> replay_session(const SessionLog & log, const harness::RunConfig & cfg);

}  // namespace haco::copilot

#endif  // HACO__COPILOT__SESSION_HPP_
