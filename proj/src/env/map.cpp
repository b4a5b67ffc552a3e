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

#include "haco/env/map.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace haco::env
{

double wrap_angle(double a)
{
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) {
    a += kTwoPi;
  } else if (a > std::numbers::pi) {
    a -= kTwoPi;
  }
  return a;
}

namespace
{

Vec2 right_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

}  // namespace

void MapSpec::rebuild()
{
  centerline.clear();
  arc_length.clear();
  tangent_heading.clear();
  Vec2 p(0.0, 0.0);
  double heading = 0.0;
  double s = 0.0;
  centerline.push_back(p);
  arc_length.push_back(0.0);
  tangent_heading.push_back(heading);

  for (const auto & seg : segments) {
    const double arc = seg.arc_length();
    if (!(arc > 0.0)) {
      throw MapError("segment with non-positive length");
    }
    const int n = std::max(1, static_cast<int>(std::ceil(arc / kSampleSpacing)));
    const Vec2 start = p;
    const double h0 = heading;
    if (seg.kind == SegmentKind::kStraight) {
      const Vec2 dir(std::cos(h0), std::sin(h0));
      for (int k = 1; k <= n; ++k) {
        const double d = arc * k / n;
        centerline.push_back(start + d * dir);
        arc_length.push_back(s + d);
        tangent_heading.push_back(h0);
      }
    } else {
      const double sign = seg.kind == SegmentKind::kRightCurve ? 1.0 : -1.0;
      const Vec2 center = start + sign * seg.radius * right_normal(h0);
      for (int k = 1; k <= n; ++k) {
        const double h = h0 + sign * seg.angle * k / n;
        centerline.push_back(center - sign * seg.radius * right_normal(h));
        arc_length.push_back(s + arc * k / n);
        tangent_heading.push_back(wrap_angle(h));
      }
      heading = wrap_angle(h0 + sign * seg.angle);
    }
    p = centerline.back();
    s += arc;
  }

  const double hw = half_width();
  left_boundary.resize(centerline.size());
  right_boundary.resize(centerline.size());
  for (std::size_t i = 0; i < centerline.size(); ++i) {
    const Vec2 n = right_normal(tangent_heading[i]);
    right_boundary[i] = centerline[i] + hw * n;
    left_boundary[i] = centerline[i] - hw * n;
  }
  destination = length();
  for (auto & ob : obstacles) {
    ob.center = point_at(ob.arc_position, ob.lateral);
  }
}

Vec2 MapSpec::point_at(double s, double lateral) const
{
  if (centerline.size() < 2) {
    throw MapError("map has not been built");
  }
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(arc_length.begin(), it));
  i = std::clamp<std::size_t>(i, 1, centerline.size() - 1);
  const double s0 = arc_length[i - 1];
  const double s1 = arc_length[i];
  const double t = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
  const Vec2 base = (1.0 - t) * centerline[i - 1] + t * centerline[i];
  return base + lateral * right_normal(heading_at(s));
}

double MapSpec::heading_at(double s) const
{
  if (centerline.size() < 2) {
    throw MapError("map has not been built");
  }
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(arc_length.begin(), it));
  i = std::clamp<std::size_t>(i, 1, centerline.size() - 1);
  const double s0 = arc_length[i - 1];
  const double s1 = arc_length[i];
  const double t = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
  const double dh = wrap_angle(tangent_heading[i] - tangent_heading[i - 1]);
  return wrap_angle(tangent_heading[i - 1] + t * dh);
}

bool MapSpec::operator==(const MapSpec & other) const
{
  if (
    seed != other.seed || lane_width != other.lane_width || lane_count != other.lane_count ||
    segments.size() != other.segments.size() || obstacles.size() != other.obstacles.size()) {
    return false;
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto & a = segments[i];
    const auto & b = other.segments[i];
    if (a.kind != b.kind || a.length != b.length || a.radius != b.radius || a.angle != b.angle) {
      return false;
    }
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto & a = obstacles[i];
    const auto & b = other.obstacles[i];
    if (
      a.center != b.center || a.radius != b.radius || a.arc_position != b.arc_position ||
      a.lateral != b.lateral) {
      return false;
    }
  }
  return centerline == other.centerline;
}

Projection project(const MapSpec & map, const Vec2 & p)
{
  const auto & c = map.centerline;
  if (c.size() < 2) {
    throw MapError("map has not been built");
  }
  Projection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const Vec2 seg = c[i + 1] - c[i];
    const double len2 = seg.squaredNorm();
    double t = len2 > 0.0 ? (p - c[i]).dot(seg) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 foot = c[i] + t * seg;
    const double d2 = (p - foot).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.index = i;
      best.arc = map.arc_length[i] + t * (map.arc_length[i + 1] - map.arc_length[i]);
      const Vec2 rel = p - foot;
      const double cross = seg.x() * rel.y() - seg.y() * rel.x();
      best.distance = std::sqrt(d2);
      best.lateral = cross >= 0.0 ? best.distance : -best.distance;
    }
  }
  best.heading = map.heading_at(best.arc);
  return best;
}

namespace
{

bool self_clearance_ok(const MapSpec & map)
{
  const double min_gap = 2.0 * map.half_width() + 6.0;
  const double min_gap2 = min_gap * min_gap;
  const auto & c = map.centerline;
  const std::size_t stride = 2;
  for (std::size_t i = 0; i < c.size(); i += stride) {
    for (std::size_t j = i + stride; j < c.size(); j += stride) {
      if (map.arc_length[j] - map.arc_length[i] < 2.0 * min_gap) {
        continue;
      }
      if ((c[i] - c[j]).squaredNorm() < min_gap2) {
        return false;
      }
    }
  }
  return true;
}

MapSpec sample_candidate(std::uint64_t seed, int attempt, const Difficulty & d)
{
  std::seed_seq seq{
    static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32),
    static_cast<std::uint32_t>(attempt), 0x6d617073U};
  std::mt19937_64 rng(seq);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  MapSpec map;
  map.seed = seed;
  map.lane_width = d.lane_width;
  map.lane_count = d.lane_count;
  map.segments.push_back({SegmentKind::kStraight, d.spawn_straight, 0.0, 0.0});
  const int count = std::uniform_int_distribution<int>(d.min_segments, d.max_segments)(rng);
  SegmentKind previous = SegmentKind::kStraight;
  for (int i = 0; i < count; ++i) {
    auto kind = static_cast<SegmentKind>(std::uniform_int_distribution<int>(0, 2)(rng));
    // no two same-direction curves in a row, so the road cannot spiral
    if (kind != SegmentKind::kStraight && kind == previous) {
      kind = SegmentKind::kStraight;
    }
    Segment seg;
    seg.kind = kind;
    if (kind == SegmentKind::kStraight) {
      seg.length = uniform(d.min_straight, d.max_straight);
    } else {
      seg.radius = uniform(d.min_radius, d.max_radius);
      seg.angle = uniform(d.min_angle, d.max_angle);
    }
    map.segments.push_back(seg);
    previous = kind;
  }
  map.rebuild();

  const double hw = map.half_width();
  const double first = d.spawn_straight + 10.0;
  const double last = map.length() - 15.0;
  const double p_slot = std::clamp(d.obstacle_density * d.obstacle_spacing / 100.0, 0.0, 1.0);
  if (d.obstacle_density > 0.0) {
    for (double s = first; s <= last; s += d.obstacle_spacing) {
      if (uniform(0.0, 1.0) >= p_slot) {
        continue;
      }
      Obstacle ob;
      ob.radius = uniform(d.obstacle_min_radius, d.obstacle_max_radius);
      ob.arc_position = std::min(last, s + uniform(-3.0, 3.0));
      bool placed = false;
      for (int tries = 0; tries < 16 && !placed; ++tries) {
        ob.lateral = uniform(-hw + ob.radius, hw - ob.radius);
        const double gap = std::max(hw - (ob.lateral + ob.radius), (ob.lateral - ob.radius) + hw);
        placed = gap >= d.min_corridor;
      }
      if (placed) {
        map.obstacles.push_back(ob);
      }
    }
  }
  map.rebuild();
  return map;
}

}  // namespace

MapSpec generate_map(std::uint64_t seed, const Difficulty & difficulty, const FeasibilityCheck & check)
{
  if (difficulty.min_segments < 1 || difficulty.max_segments < difficulty.min_segments) {
    throw MapError("difficulty: invalid segment-count range");
  }
  if (difficulty.obstacle_density < 0.0) {
    throw MapError("difficulty: obstacle density must be non-negative");
  }
  for (int attempt = 0; attempt < difficulty.max_retries; ++attempt) {
    MapSpec map = sample_candidate(seed, attempt, difficulty);
    if (!self_clearance_ok(map)) {
      continue;
    }
    if (check && !check(map)) {
      continue;
    }
    return map;
  }
  throw MapError(
    "no feasible map for seed " + std::to_string(seed) + " after " +
    std::to_string(difficulty.max_retries) + " attempts");
}

void write_map(std::ostream & out, const MapSpec & map)
{
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << "haco-map v" << MapSpec::kFormatVersion << "\n";
  out << "seed " << map.seed << "\n";
  out << "lanes " << map.lane_width << " " << map.lane_count << "\n";
  for (const auto & seg : map.segments) {
    switch (seg.kind) {
      case SegmentKind::kStraight:
        out << "segment straight " << seg.length << "\n";
        break;
      case SegmentKind::kLeftCurve:
        out << "segment left " << seg.radius << " " << seg.angle << "\n";
        break;
      case SegmentKind::kRightCurve:
        out << "segment right " << seg.radius << " " << seg.angle << "\n";
        break;
    }
  }
  for (const auto & ob : map.obstacles) {
    out << "obstacle " << ob.arc_position << " " << ob.lateral << " " << ob.radius << "\n";
  }
  out << "end\n";
  out.precision(old_precision);
}

MapSpec read_map(std::istream & in)
{
  std::string line;
  if (!std::getline(in, line) || line != "haco-map v1") {
    throw MapError("unsupported map header: '" + line + "'");
  }
  MapSpec map;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "seed") {
      row >> map.seed;
    } else if (key == "lanes") {
      row >> map.lane_width >> map.lane_count;
    } else if (key == "segment") {
      std::string kind;
      Segment seg;
      row >> kind;
      if (kind == "straight") {
        row >> seg.length;
      } else if (kind == "left" || kind == "right") {
        seg.kind = kind == "left" ? SegmentKind::kLeftCurve : SegmentKind::kRightCurve;
        row >> seg.radius >> seg.angle;
      } else {
        throw MapError("unknown segment kind '" + kind + "'");
      }
      map.segments.push_back(seg);
    } else if (key == "obstacle") {
      Obstacle ob;
      row >> ob.arc_position >> ob.lateral >> ob.radius;
      map.obstacles.push_back(ob);
    } else if (key == "end") {
      ended = true;
      break;
    } else if (!key.empty()) {
      throw MapError("unknown map record '" + key + "'");
    }
    if (row.fail()) {
      throw MapError("malformed map record: '" + line + "'");
    }
  }
  if (!ended) {
    throw MapError("map fixture missing 'end'");
  }
  map.rebuild();
  return map;
}

std::string map_to_string(const MapSpec & map)
{
  std::ostringstream out;
  write_map(out, map);
  return out.str();
}

MapSpec map_from_string(const std::string & text)
{
  std::istringstream in(text);
  return read_map(in);
}

}  // namespace haco::env
