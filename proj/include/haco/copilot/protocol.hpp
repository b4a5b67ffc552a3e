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

#ifndef HACO__COPILOT__PROTOCOL_HPP_
#define HACO__COPILOT__PROTOCOL_HPP_

#include "haco/env/driving_env.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace haco::copilot
{

inline constexpr int kProtocolVersion = 1;

struct FrameStats
{
  double takeover_rate = 0.0;      // this episode so far
  double intervention_cost = 0.0;  // this episode so far
  int steps = 0;
  std::int64_t total_steps = 0;
};

/// Server -> console, once per tick. Geometry in meters, screen-like frame
/// (x right, y down), headings in radians.
struct FrameMsg
{
  std::int64_t tick = 0;
  std::int64_t episode = 0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double half_width = 0.0;
  std::vector<env::Vec2> centerline;
  std::vector<env::Obstacle> obstacles;
  std::vector<env::Vec2> lidar;  // ray endpoints
  env::Action agent_action = env::Action::Zero();
  env::Action applied_action = env::Action::Zero();
  bool takeover = false;
  bool episode_start = false;
  FrameStats stats;
};

/// Console -> server. `tick` acknowledges the latest frame seen.
struct InputMsg
{
  std::int64_t tick = 0;
  bool takeover = false;
  double steering = 0.0;
  double throttle = 0.0;
};

struct HelloMsg
{
  std::string role;  // "console" or "server"
  double tick_rate = 0.0;
};

struct ByeMsg
{
  std::string reason;
};

using Message = std::variant<FrameMsg, InputMsg, HelloMsg, ByeMsg>;

class ProtocolError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const FrameMsg & m);
nlohmann::json to_json(const InputMsg & m);
nlohmann::json to_json(const HelloMsg & m);
nlohmann::json to_json(const ByeMsg & m);
nlohmann::json to_json(const Message & m);

/// Schema checks; the error text names the first offending field.
std::optional<std::string> validate_frame(const nlohmann::json & j);
std::optional<std::string> validate_input(const nlohmann::json & j);

/// Parses one message line. Throws ProtocolError on malformed JSON, a wrong
/// version, an unknown type or a schema violation. Input steering and
/// throttle are clamped to [-1, 1].
Message parse_message(const std::string & line);

/// Builds the frame for the environment's current state.
FrameMsg make_frame(
  const env::DrivingEnv & env, std::int64_t tick, std::int64_t episode,
  const env::Action & agent_action, const env::Action & applied_action, bool takeover,
  const FrameStats & stats, std::size_t max_centerline_points = 256);

}  // namespace haco::copilot

#endif  // HACO__COPILOT__PROTOCOL_HPP_
