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

#include "haco/env/driving_env.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace haco::env
{

namespace
{

constexpr double kPi = std::numbers::pi;

std::vector<std::uint8_t> contacts_at(const Vec2 & p, const MapSpec & map, const EnvConfig & cfg)
{
  std::vector<std::uint8_t> out(map.obstacles.size(), 0);
  for (std::size_t i = 0; i < map.obstacles.size(); ++i) {
    const auto & ob = map.obstacles[i];
    const double reach = ob.radius + cfg.car_radius;
    out[i] = (p - ob.center).squaredNorm() < reach * reach ? 1 : 0;
  }
  return out;
}

}  // namespace

bool is_out_of_road(const Projection & proj, const MapSpec & map)
{
  return proj.distance > map.half_width();
}

PhysicsOutcome simulate_step(
  const SimState & state, const Action & action, const MapSpec & map, const EnvConfig & cfg)
{
  PhysicsOutcome out;
  out.next = state;
  EgoState & ego = out.next.ego;
  const double steer = std::clamp(action(0), -1.0, 1.0);
  const double throttle = std::clamp(action(1), -1.0, 1.0);
  const double v = state.ego.speed;
  const double heading = state.ego.heading;

  ego.x = state.ego.x + v * std::cos(heading) * cfg.dt;
  ego.y = state.ego.y + v * std::sin(heading) * cfg.dt;
  ego.heading = wrap_angle(heading + (v / cfg.wheelbase) * std::tan(steer * cfg.max_steer) * cfg.dt);
  ego.speed = std::clamp(v + throttle * cfg.max_accel * cfg.dt, 0.0, cfg.max_speed);
  ego.last_action = Action(steer, throttle);

  const auto now = contacts_at(ego.position(), map, cfg);
  if (out.next.in_contact.size() != now.size()) {
    out.next.in_contact.assign(now.size(), 0);
  }
  for (std::size_t i = 0; i < now.size(); ++i) {
    if (now[i] && !out.next.in_contact[i]) {
      ++out.new_contacts;
    }
    out.any_contact = out.any_contact || now[i];
  }
  out.next.in_contact = now;
  if (out.new_contacts > 0) {
    ego.speed *= cfg.contact_damping;
  }
  out.projection = project(map, ego.position());
  out.out_of_road = is_out_of_road(out.projection, map);
  return out;
}

namespace
{

// Distance along a unit ray to a segment, or +inf.
double ray_segment(const Vec2 & o, const Vec2 & dir, const Vec2 & a, const Vec2 & b)
{
  const Vec2 e = b - a;
  const double denom = dir.x() * e.y() - dir.y() * e.x();
  if (std::abs(denom) < 1e-12) {
    return std::numeric_limits<double>::infinity();
  }
  const Vec2 w = a - o;
  const double t = (w.x() * e.y() - w.y() * e.x()) / denom;
  const double u = (w.x() * dir.y() - w.y() * dir.x()) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return t;
}

// Distance along a unit ray to the first crossing of a circle, or +inf.
double ray_circle(const Vec2 & o, const Vec2 & dir, const Circle & c)
{
  const Vec2 m = o - c.center;
  const double b = m.dot(dir);
  const double cc = m.squaredNorm() - c.radius * c.radius;
  if (cc <= 0.0) {
    return 0.0;
  }
  if (b > 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double disc = b * b - cc;
  if (disc < 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return -b - std::sqrt(disc);
}

}  // namespace

Eigen::VectorXd lidar_scan(
  const Vec2 & origin, double heading, int rays, double range, std::span<const Wall> walls,
  std::span<const Circle> circles)
{
  if (rays < 1) {
    throw std::invalid_argument("lidar_scan: need at least one ray");
  }
  Eigen::VectorXd out(rays);
  for (int k = 0; k < rays; ++k) {
    const double angle = heading + 2.0 * kPi * k / rays;
    const Vec2 dir(std::cos(angle), std::sin(angle));
    double best = range;
    for (const auto & w : walls) {
      best = std::min(best, ray_segment(origin, dir, w.a, w.b));
    }
    for (const auto & c : circles) {
      best = std::min(best, ray_circle(origin, dir, c));
    }
    out(k) = best / range;
  }
  return out;
}

Eigen::VectorXd lidar_scan(const EgoState & state, const MapSpec & map, const EnvConfig & cfg)
{
  const Vec2 o = state.position();
  const double reach = cfg.lidar_range + MapSpec::kSampleSpacing;
  const double reach2 = reach * reach;
  std::vector<Wall> walls;
  walls.reserve(128);
  for (const auto * boundary : {&map.left_boundary, &map.right_boundary}) {
    for (std::size_t i = 0; i + 1 < boundary->size(); ++i) {
      const Vec2 & a = (*boundary)[i];
      const Vec2 & b = (*boundary)[i + 1];
      if ((a - o).squaredNorm() <= reach2 || (b - o).squaredNorm() <= reach2) {
        walls.push_back({a, b});
      }
    }
  }
  std::vector<Circle> circles;
  for (const auto & ob : map.obstacles) {
    if ((ob.center - o).norm() - ob.radius <= cfg.lidar_range) {
      circles.push_back({ob.center, ob.radius});
    }
  }
  return lidar_scan(o, state.heading, cfg.lidar_rays, cfg.lidar_range, walls, circles);
}

int observation_dim(const EnvConfig & cfg)
{
  return 8 + static_cast<int>(cfg.lookahead_distances.size()) + cfg.lidar_rays;
}

Observation observe(const EgoState & state, const MapSpec & map, const EnvConfig & cfg)
{
  Observation obs(observation_dim(cfg));
  const Projection proj = project(map, state.position());
  const double hw = map.half_width();
  const double width = 2.0 * hw;
  obs(0) = std::clamp(state.speed / cfg.max_speed, 0.0, 1.0);
  obs(1) = std::clamp(state.last_action(0), -1.0, 1.0);
  obs(2) = std::clamp(state.last_action(1), -1.0, 1.0);
  obs(3) = wrap_angle(state.heading - proj.heading) / kPi;
  obs(4) = std::clamp(proj.lateral / hw, -1.0, 1.0);
  obs(5) = std::clamp((hw - proj.lateral) / width, 0.0, 1.0);
  obs(6) = std::clamp((hw + proj.lateral) / width, 0.0, 1.0);
  obs(7) = std::clamp((map.destination - proj.arc) / map.length(), 0.0, 1.0);
  int i = 8;
  for (const double d : cfg.lookahead_distances) {
    const Vec2 target = map.point_at(proj.arc + d);
    const Vec2 rel = target - state.position();
    obs(i++) = wrap_angle(std::atan2(rel.y(), rel.x()) - state.heading) / kPi;
  }
  obs.tail(cfg.lidar_rays) = lidar_scan(state, map, cfg);
  return obs;
}

DrivingEnv::DrivingEnv(EnvConfig cfg) : cfg_(cfg) {}

EgoState DrivingEnv::spawn_state(const MapSpec & map)
{
  EgoState ego;
  const Vec2 p = map.point_at(0.0);
  ego.x = p.x();
  ego.y = p.y();
  ego.heading = map.heading_at(0.0);
  ego.speed = 0.0;
  ego.last_action = Action::Zero();
  return ego;
}

Observation DrivingEnv::reset(std::shared_ptr<const MapSpec> map)
{
  if (!map || map->centerline.size() < 2) {
    throw std::invalid_argument("reset: map has not been built");
  }
  map_ = std::move(map);
  state_.ego = spawn_state(*map_);
  state_.in_contact.assign(map_->obstacles.size(), 0);
  progress_ = 0.0;
  steps_ = 0;
  active_ = true;
  return observe(state_.ego, *map_, cfg_);
}

StepResult DrivingEnv::step(const Action & action)
{
  if (!active_) {
    throw std::logic_error("step: episode is not active; call reset()");
  }
  Action applied = action;
  if ((action.array().abs() > 1.0).any() || !action.allFinite()) {
    ++clamped_actions_;
    spdlog::debug("step: action ({}, {}) clamped to [-1, 1]", action(0), action(1));
    applied = action.allFinite() ? Action(action.cwiseMax(-1.0).cwiseMin(1.0)) : Action::Zero();
  }
  const PhysicsOutcome outcome = simulate_step(state_, applied, *map_, cfg_);
  state_ = outcome.next;
  ++steps_;

  StepResult r;
  const double previous = progress_;
  progress_ = outcome.projection.arc;
  r.env_cost = outcome.new_contacts;
  r.out_of_road = outcome.out_of_road;
  r.success = !r.out_of_road && progress_ >= map_->destination - cfg_.success_margin;
  r.horizon = !r.success && !r.out_of_road && steps_ >= cfg_.horizon;
  r.progress = progress_;
  r.speed = state_.ego.speed;
  r.reward = cfg_.progress_weight * (progress_ - previous) +
             cfg_.speed_weight * state_.ego.speed / cfg_.max_speed +
             (r.success ? cfg_.success_reward : 0.0);
  r.observation = observe(state_.ego, *map_, cfg_);
  active_ = !r.done();
  return r;
}

}  // namespace haco::env
