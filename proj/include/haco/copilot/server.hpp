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

#ifndef HACO__COPILOT__SERVER_HPP_
#define HACO__COPILOT__SERVER_HPP_

#include "haco/copilot/session.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace haco::copilot
{

struct ServerOptions
{
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::int64_t max_ticks = 0;  // stop after this many emitted frames; 0 runs until stop()
};

struct TickTiming
{
  std::int64_t loops = 0;
  double max_jitter_ms = 0.0;  // worst lateness of a tick against its schedule
  double mean_jitter_ms = 0.0;
};

/// Websocket front end for one SessionCore. One console at a time; a second
/// connection receives a "bye" and is closed. The tick loop runs on the
/// thread that calls run(), the transport on an internal I/O thread.
class CopilotServer
{
public:
  CopilotServer(SessionCore & core, SessionConfig scfg, ServerOptions opts);
  ~CopilotServer();

  CopilotServer(const CopilotServer &) = delete;
  CopilotServer & operator=(const CopilotServer &) = delete;

  unsigned short port() const;
  void run();
  void stop();
  TickTiming timing() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace haco::copilot

#endif  // HACO__COPILOT__SERVER_HPP_
