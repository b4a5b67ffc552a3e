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

#include "haco/copilot/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace haco::copilot
{

using nlohmann::json;

namespace
{

json point(const env::Vec2 & p) { return json::array({p.x(), p.y()}); }

json action(const env::Action & a) { return {{"steering", a(0)}, {"throttle", a(1)}}; }

json header(const char * type) { return {{"v", kProtocolVersion}, {"type", type}}; }

bool finite_number(const json & j) { return j.is_number() && std::isfinite(j.get<double>()); }

class Checker
{
public:
  explicit Checker(const json & j) : j_(j) {}

  const json * field(const json & obj, const char * key, const std::string & path)
  {
    if (error) {
      return nullptr;
    }
    if (!obj.is_object() || !obj.contains(key)) {
      error = path + key + ": missing";
      return nullptr;
    }
    return &obj.at(key);
  }

  void number(const json & obj, const char * key, const std::string & path = "", double lo = -HUGE_VAL, double hi = HUGE_VAL)
  {
    const json * v = field(obj, key, path);
    if (v && (!finite_number(*v) || v->get<double>() < lo || v->get<double>() > hi)) {
      error = path + key + ": expected a finite number in range";
    }
  }

  void integer(const json & obj, const char * key, const std::string & path = "", std::int64_t lo = 0)
  {
    const json * v = field(obj, key, path);
    if (v && (!v->is_number_integer() || v->get<std::int64_t>() < lo)) {
      error = path + key + ": expected an integer >= " + std::to_string(lo);
    }
  }

  void boolean(const json & obj, const char * key, const std::string & path = "")
  {
    const json * v = field(obj, key, path);
    if (v && !v->is_boolean()) {
      error = path + key + ": expected a boolean";
    }
  }

  void points(const json & obj, const char * key)
  {
    const json * v = field(obj, key, "");
    if (!v) {
      return;
    }
    if (!v->is_array()) {
      error = std::string(key) + ": expected an array";
      return;
    }
    for (const auto & p : *v) {
      if (!p.is_array() || p.size() != 2 || !finite_number(p[0]) || !finite_number(p[1])) {
        error = std::string(key) + ": expected [x, y] pairs of finite numbers";
        return;
      }
    }
  }

  void envelope(const char * type)
  {
    integer(j_, "v", "", 0);
    if (!error && j_.at("v").get<int>() != kProtocolVersion) {
      error = "v: unsupported protocol version";
    }
    const json * t = field(j_, "type", "");
    if (t && (!t->is_string() || *t != type)) {
      error = std::string("type: expected '") + type + "'";
    }
  }

  void action_object(const char * key)
  {
    const json * a = field(j_, key, "");
    if (!a) {
      return;
    }
    const std::string path = std::string(key) + ".";
    number(*a, "steering", path, -1.0, 1.0);
    number(*a, "throttle", path, -1.0, 1.0);
  }

  std::optional<std::string> error;

private:
  const json & j_;
};

env::Action read_action(const json & j)
{
  return {j.at("steering").get<double>(), j.at("throttle").get<double>()};
}

FrameMsg frame_from_json(const json & j)
{
  FrameMsg m;
  m.tick = j.at("tick").get<std::int64_t>();
  m.episode = j.at("episode").get<std::int64_t>();
  const auto & ego = j.at("ego");
  m.x = ego.at("x").get<double>();
  m.y = ego.at("y").get<double>();
  m.heading = ego.at("heading").get<double>();
  m.speed = ego.at("speed").get<double>();
  m.half_width = j.at("half_width").get<double>();
  for (const auto & p : j.at("centerline")) {
    m.centerline.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  for (const auto & o : j.at("obstacles")) {
    env::Obstacle ob;
    ob.center = {o.at("x").get<double>(), o.at("y").get<double>()};
    ob.radius = o.at("radius").get<double>();
    m.obstacles.push_back(ob);
  }
  for (const auto & p : j.at("lidar")) {
    m.lidar.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  m.agent_action = read_action(j.at("agent_action"));
  m.applied_action = read_action(j.at("applied_action"));
  m.takeover = j.at("takeover").get<bool>();
  m.episode_start = j.at("episode_start").get<bool>();
  const auto & s = j.at("stats");
  m.stats.takeover_rate = s.at("takeover_rate").get<double>();
  m.stats.intervention_cost = s.at("intervention_cost").get<double>();
  m.stats.steps = s.at("steps").get<int>();
  m.stats.total_steps = s.at("total_steps").get<std::int64_t>();
  return m;
}

}  // namespace

json to_json(const FrameMsg & m)
{
  json j = header("frame");
  j["tick"] = m.tick;
  j["episode"] = m.episode;
  j["ego"] = {{"x", m.x}, {"y", m.y}, {"heading", m.heading}, {"speed", m.speed}};
  j["half_width"] = m.half_width;
  json line = json::array();
  for (const auto & p : m.centerline) {
    line.push_back(point(p));
  }
  j["centerline"] = std::move(line);
  json obs = json::array();
  for (const auto & o : m.obstacles) {
    obs.push_back({{"x", o.center.x()}, {"y", o.center.y()}, {"radius", o.radius}});
  }
  j["obstacles"] = std::move(obs);
  json lidar = json::array();
  for (const auto & p : m.lidar) {
    lidar.push_back(point(p));
  }
  j["lidar"] = std::move(lidar);
  j["agent_action"] = action(m.agent_action);
  j["applied_action"] = action(m.applied_action);
  j["takeover"] = m.takeover;
  j["episode_start"] = m.episode_start;
  j["stats"] = {
    {"takeover_rate", m.stats.takeover_rate},
    {"intervention_cost", m.stats.intervention_cost},
    {"steps", m.stats.steps},
    {"total_steps", m.stats.total_steps}};
  return j;
}

json to_json(const InputMsg & m)
{
  json j = header("input");
  j["tick"] = m.tick;
  j["takeover"] = m.takeover;
  j["steering"] = m.steering;
  j["throttle"] = m.throttle;
  return j;
}

json to_json(const HelloMsg & m)
{
  json j = header("hello");
  j["role"] = m.role;
  j["tick_rate"] = m.tick_rate;
  return j;
}

json to_json(const ByeMsg & m)
{
  json j = header("bye");
  j["reason"] = m.reason;
  return j;
}

json to_json(const Message & m)
{
  return std::visit([](const auto & v) { return to_json(v); }, m);
}

std::optional<std::string> validate_frame(const json & j)
{
  Checker c(j);
  c.envelope("frame");
  c.integer(j, "tick");
  c.integer(j, "episode");
  if (const json * ego = c.field(j, "ego", "")) {
    c.number(*ego, "x", "ego.");
    c.number(*ego, "y", "ego.");
    c.number(*ego, "heading", "ego.", -std::numbers::pi, std::numbers::pi);
    c.number(*ego, "speed", "ego.", 0.0);
  }
  c.number(j, "half_width", "", 0.0);
  c.points(j, "centerline");
  if (const json * obs = c.field(j, "obstacles", ""); obs && !c.error) {
    if (!obs->is_array()) {
      c.error = "obstacles: expected an array";
    } else {
      for (const auto & o : *obs) {
        c.number(o, "x", "obstacles[].");
        c.number(o, "y", "obstacles[].");
        c.number(o, "radius", "obstacles[].", 0.0);
      }
    }
  }
  c.points(j, "lidar");
  c.action_object("agent_action");
  c.action_object("applied_action");
  c.boolean(j, "takeover");
  c.boolean(j, "episode_start");
  if (const json * s = c.field(j, "stats", "")) {
    c.number(*s, "takeover_rate", "stats.", 0.0, 1.0);
    c.number(*s, "intervention_cost", "stats.", 0.0);
    c.integer(*s, "steps", "stats.");
    c.integer(*s, "total_steps", "stats.");
  }
  return c.error;
}

std::optional<std::string> validate_input(const json & j)
{
  Checker c(j);
  c.envelope("input");
  c.integer(j, "tick");
  c.boolean(j, "takeover");
  c.number(j, "steering");
  c.number(j, "throttle");
  return c.error;
}

Message parse_message(const std::string & line)
{
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception & e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ProtocolError("message without a type");
  }
  if (!j.contains("v") || j.at("v") != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "input") {
    if (auto err = validate_input(j)) {
      throw ProtocolError("input: " + *err);
    }
    InputMsg m;
    m.tick = j.at("tick").get<std::int64_t>();
    m.takeover = j.at("takeover").get<bool>();
    m.steering = std::clamp(j.at("steering").get<double>(), -1.0, 1.0);
    m.throttle = std::clamp(j.at("throttle").get<double>(), -1.0, 1.0);
    return m;
  }
  if (type == "frame") {
    if (auto err = validate_frame(j)) {
      throw ProtocolError("frame: " + *err);
    }
    return frame_from_json(j);
  }
  if (type == "hello") {
    HelloMsg m;
    if (!j.contains("role") || !j.at("role").is_string()) {
      throw ProtocolError("hello: role missing");
    }
    m.role = j.at("role").get<std::string>();
    if (j.contains("tick_rate") && j.at("tick_rate").is_number()) {
      m.tick_rate = j.at("tick_rate").get<double>();
    }
    return m;
  }
  if (type == "bye") {
    ByeMsg m;
    if (j.contains("reason") && j.at("reason").is_string()) {
      m.reason = j.at("reason").get<std::string>();
    }
    return m;
  }
  throw ProtocolError("unknown message type '" + type + "'");
}

FrameMsg make_frame(
  const env::DrivingEnv & env, std::int64_t tick, std::int64_t episode,
  const env::Action & agent_action, const env::Action & applied_action, bool takeover,
  const FrameStats & stats, std::size_t max_centerline_points)
{
  const auto & map = env.map();
  const auto & ego = env.ego();
  FrameMsg m;
  m.tick = tick;
  m.episode = episode;
  m.x = ego.x;
  m.y = ego.y;
  m.heading = ego.heading;
  m.speed = ego.speed;
  m.half_width = map.half_width();
  const std::size_t n = map.centerline.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_centerline_points - 1) / std::max<std::size_t>(1, max_centerline_points));
  for (std::size_t i = 0; i < n; i += stride) {
    m.centerline.push_back(map.centerline[i]);
  }
  if (n > 0 && (n - 1) % stride != 0) {
    m.centerline.push_back(map.centerline.back());
  }
  m.obstacles = map.obstacles;
  const auto & cfg = env.config();
  const Eigen::VectorXd scan = env::lidar_scan(ego, map, cfg);
  for (Eigen::Index k = 0; k < scan.size(); ++k) {
    const double a = ego.heading + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(scan.size());
    const double d = scan(k) * cfg.lidar_range;
    m.lidar.emplace_back(ego.x + d * std::cos(a), ego.y + d * std::sin(a));
  }
  m.agent_action = agent_action;
  m.applied_action = applied_action;
  m.takeover = takeover;
  m.episode_start = env.steps() == 0;
  m.stats = stats;
  return m;
}

}  // namespace haco::copilot
