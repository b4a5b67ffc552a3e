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

#ifndef HACO__ENV__DRIVING_ENV_HPP_
#define HACO__ENV__DRIVING_ENV_HPP_

#include "haco/env/map.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace haco::env
{

/// (steering, throttle), both in [-1, 1]. The world frame is screen-like
/// (x right, y down), so an increasing heading is a clockwise, rightward
/// turn: steering +1 turns right, -1 turns left. Throttle < 0 brakes.
using Action = Eigen::Vector2d;
using Observation = Eigen::VectorXd;

struct EnvConfig
{
  double dt = 0.1;
  double wheelbase = 2.5;
  double max_speed = 10.0;
  double max_accel = 5.0;
  double max_steer = 0.5;  // radians at |steering| = 1
  double car_radius = 1.0;
  int lidar_rays = 24;
  double lidar_range = 30.0;
  int horizon = 400;
  double progress_weight = 1.0;
  double speed_weight = 0.1;
  double success_reward = 20.0;
  double success_margin = 2.0;  // meters before the destination that count as arrival
  double contact_damping = 0.5;
  std::array<double, 3> lookahead_distances{5.0, 12.0, 24.0};
};

struct EgoState
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // wrapped to (-pi, pi]
  double speed = 0.0;    // [0, max_speed]
  Action last_action = Action::Zero();

  Vec2 position() const { return {x, y}; }
};

/// Physics-level state: ego plus the set of obstacles currently overlapped,
/// which makes contact counting edge-triggered.
struct SimState
{
  EgoState ego;
  std::vector<std::uint8_t> in_contact;
};

/// Outcome of one kinematic step, independent of rewards.
struct PhysicsOutcome
{
  SimState next;
  int new_contacts = 0;
  bool any_contact = false;
  bool out_of_road = false;
  Projection projection;
};

/// Kinematic bicycle update over one dt followed by contact and road checks.
PhysicsOutcome simulate_step(
  const SimState & state, const Action & action, const MapSpec & map, const EnvConfig & cfg);

bool is_out_of_road(const Projection & proj, const MapSpec & map);

struct Wall
{
  Vec2 a;
  Vec2 b;
};

struct Circle
{
  Vec2 center;
  double radius = 0.0;
};

/// K rays spanning 360 degrees starting at `heading` (index 0 points forward,
/// indices follow increasing heading, i.e. clockwise on screen). Returns distance / range in [0, 1].
Eigen::VectorXd lidar_scan(
  const Vec2 & origin, double heading, int rays, double range, std::span<const Wall> walls,
  std::span<const Circle> circles);

Eigen::VectorXd lidar_scan(const EgoState & state, const MapSpec & map, const EnvConfig & cfg);

/// Observation layout (see observation_dim()):
///  0 speed / max_speed                      [0, 1]
///  1 last steering                          [-1, 1]
///  2 last throttle                          [-1, 1]
///  3 heading error / pi                     [-1, 1]
///  4 lateral offset / half width (clamped)  [-1, 1]
///  5 distance to right boundary / road width [0, 1]
///  6 distance to left boundary / road width [0, 1]
///  7 remaining distance / track length      [0, 1]
///  8.. bearing of each lookahead checkpoint / pi   [-1, 1]
///  then lidar_rays normalized distances    [0, 1]
int observation_dim(const EnvConfig & cfg);
Observation observe(const EgoState & state, const MapSpec & map, const EnvConfig & cfg);

struct StepResult
{
  Observation observation;
  double reward = 0.0;  // evaluation and baselines only
  int env_cost = 0;     // new obstacle contacts this step
  bool success = false;
  bool out_of_road = false;
  bool horizon = false;
  double progress = 0.0;
  double speed = 0.0;

  bool terminal() const { return success || out_of_road; }
  bool done() const { return success || out_of_road || horizon; }
};

class DrivingEnv
{
public:
  explicit DrivingEnv(EnvConfig cfg = {});

  Observation reset(std::shared_ptr<const MapSpec> map);
  StepResult step(const Action & action);

  const EgoState & ego() const { return state_.ego; }
  const SimState & sim_state() const { return state_; }
  const MapSpec & map() const { return *map_; }
  std::shared_ptr<const MapSpec> map_ptr() const { return map_; }
  const EnvConfig & config() const { return cfg_; }
  int steps() const { return steps_; }
  bool active() const { return active_; }
  std::uint64_t clamped_actions() const { return clamped_actions_; }

  static EgoState spawn_state(const MapSpec & map);

private:
  EnvConfig cfg_;
  std::shared_ptr<const MapSpec> map_;
  SimState state_;
  double progress_ = 0.0;
  int steps_ = 0;
  bool active_ = false;
  std::uint64_t clamped_actions_ = 0;
};

}  // namespace haco::env

#endif  // HACO__ENV__DRIVING_ENV_HPP_
