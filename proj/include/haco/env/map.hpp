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

#ifndef HACO__ENV__MAP_HPP_
#define HACO__ENV__MAP_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace haco::env
{

using Vec2 = Eigen::Vector2d;

enum class SegmentKind { kStraight, kRightCurve, kLeftCurve };

struct Segment
{
  SegmentKind kind = SegmentKind::kStraight;
  double length = 0.0;  // straight: meters
  double radius = 0.0;  // curves: meters
  double angle = 0.0;   // curves: radians, positive

  double arc_length() const { return kind == SegmentKind::kStraight ? length : radius * angle; }
};

struct Obstacle
{
  Vec2 center;
  double radius = 0.0;
  double arc_position = 0.0;  // along the centerline
  double lateral = 0.0;       // right of centerline is positive
};

struct Difficulty
{
  int min_segments = 3;
  int max_segments = 4;
  double spawn_straight = 15.0;  // obstacle-free straight at the start
  double min_straight = 20.0;
  double max_straight = 40.0;
  double min_radius = 25.0;
  double max_radius = 45.0;
  double min_angle = 0.5;
  double max_angle = 1.4;
  double obstacle_density = 1.5;  // expected obstacles per 100 m
  double obstacle_min_radius = 0.4;
  double obstacle_max_radius = 0.9;
  double obstacle_spacing = 25.0;
  double min_corridor = 3.2;  // widest free gap next to an obstacle
  double lane_width = 4.0;
  int lane_count = 2;
  int max_retries = 32;
};

/// A procedurally generated road. Everything except `seed`, `segments`,
/// `lane_width`, `lane_count` and `obstacles` is derived by rebuild().
struct MapSpec
{
  static constexpr int kFormatVersion = 1;
  static constexpr double kSampleSpacing = 0.5;

  std::uint64_t seed = 0;
  std::vector<Segment> segments;
  double lane_width = 4.0;
  int lane_count = 2;
  std::vector<Obstacle> obstacles;

  // derived
  std::vector<Vec2> centerline;
  std::vector<double> arc_length;
  std::vector<double> tangent_heading;
  std::vector<Vec2> left_boundary;
  std::vector<Vec2> right_boundary;
  double destination = 0.0;

  double half_width() const { return 0.5 * lane_width * lane_count; }
  double length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }

  /// Samples the centerline from the segment list and recomputes obstacle centers.
  void rebuild();

  /// Point on the centerline at arc length s, shifted right by `lateral`.
  Vec2 point_at(double s, double lateral = 0.0) const;
  double heading_at(double s) const;

  bool operator==(const MapSpec & other) const;
};

/// Nearest-centerline projection of a point.
struct Projection
{
  double arc = 0.0;       // arc length of the foot point (clamped to the track)
  double lateral = 0.0;   // signed, right positive
  double distance = 0.0;  // Euclidean distance to the foot point
  double heading = 0.0;   // tangent heading at the foot point
  std::size_t index = 0;  // polyline segment index
};

Projection project(const MapSpec & map, const Vec2 & p);

class MapError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Returns true when a generated map is acceptable (e.g. the scripted expert
/// completes it without contact).
using FeasibilityCheck = std::function<bool(const MapSpec &)>;

/// Deterministic in `seed`. Candidate maps failing geometric checks or
/// `check` are resampled from a seed-derived stream; MapError after
/// `difficulty.max_retries` attempts.
MapSpec generate_map(
  std::uint64_t seed, const Difficulty & difficulty, const FeasibilityCheck & check = {});

/// Versioned text fixture format (segments, obstacles, seed).
void write_map(std::ostream & out, const MapSpec & map);
MapSpec read_map(std::istream & in);
std::string map_to_string(const MapSpec & map);
MapSpec map_from_string(const std::string & text);

double wrap_angle(double a);

}  // namespace haco::env

#endif  // HACO__ENV__MAP_HPP_
