// Copyright 2026 The segpark Authors
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

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace segpark
{

/// Wrap an angle to (-pi, pi].
[[nodiscard]] double wrap_angle(double angle) noexcept;

/// Planar point in meters.
struct Vec2
{
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

[[nodiscard]] inline double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
[[nodiscard]] inline double cross(Vec2 a, Vec2 b) noexcept { return a.x * b.y - a.y * b.x; }
[[nodiscard]] inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }

/// SE(2) pose. The heading is always stored wrapped to (-pi, pi].
class Pose2
{
public:
  constexpr Pose2() = default;
  Pose2(double x, double y, double psi) noexcept : x_(x), y_(y), psi_(wrap_angle(psi)) {}

  [[nodiscard]] double x() const noexcept { return x_; }
  [[nodiscard]] double y() const noexcept { return y_; }
  [[nodiscard]] double psi() const noexcept { return psi_; }
  [[nodiscard]] Vec2 position() const noexcept { return {x_, y_}; }

  friend bool operator==(const Pose2 &, const Pose2 &) = default;

private:
  double x_{0.0};
  double y_{0.0};
  double psi_{0.0};
};

/// Express `local_pose` (given in the frame `parent_frame_pose`) in the parent's parent frame.
[[nodiscard]] Pose2 compose(const Pose2 & parent_frame_pose, const Pose2 & local_pose) noexcept;

/// Inverse of compose: express `world_pose` relative to `frame`.
[[nodiscard]] Pose2 express_in_frame(const Pose2 & world_pose, const Pose2 & frame) noexcept;

/// Point transforms between a frame and its parent.
[[nodiscard]] Vec2 transform_point(const Pose2 & frame, Vec2 local) noexcept;
[[nodiscard]] Vec2 point_in_frame(Vec2 world, const Pose2 & frame) noexcept;

/// Rectangular vehicle body referenced to the rear axle center.
struct FootprintSpec
{
  double front_overhang{3.7};  // rear axle to front bumper
  double rear_overhang{1.0};   // rear axle to rear bumper
  double half_width{0.95};

  [[nodiscard]] bool valid() const noexcept;
  [[nodiscard]] double length() const noexcept { return front_overhang + rear_overhang; }
  [[nodiscard]] double area() const noexcept { return length() * 2.0 * half_width; }
  /// Distance from the rear axle to the farthest body corner.
  [[nodiscard]] double circumradius() const noexcept;
  /// Strict interior test for a point given in the vehicle frame.
  [[nodiscard]] bool contains_local(Vec2 p) const noexcept;

  friend bool operator==(const FootprintSpec &, const FootprintSpec &) = default;
};

/// Strictly convex polygon with counter-clockwise vertices.
class ConvexPolygon
{
public:
  static constexpr double kTolerance = 1e-9;

  /// Throws std::invalid_argument unless the vertices form a strictly convex CCW polygon.
  explicit ConvexPolygon(std::vector<Vec2> vertices);

  [[nodiscard]] std::span<const Vec2> vertices() const noexcept { return vertices_; }
  [[nodiscard]] std::size_t size() const noexcept { return vertices_.size(); }
  [[nodiscard]] double area() const noexcept;
  /// Strict interior test.
  [[nodiscard]] bool contains(Vec2 p) const noexcept;

  /// Axis-aligned rectangle [x0, x1] x [y0, y1].
  static ConvexPolygon rectangle(double x0, double y0, double x1, double y1);

private:
  std::vector<Vec2> vertices_;
};

/// Shoelace area of an arbitrary simple polygon (signed, positive for CCW).
[[nodiscard]] double signed_area(std::span<const Vec2> polygon) noexcept;

/// Target parking slot: center pose (heading = parked vehicle heading) and extent.
struct SlotSpec
{
  Pose2 pose;
  double width{2.5};  // lateral extent
  double depth{7.4};  // extent along the slot heading

  [[nodiscard]] bool valid() const noexcept { return width > 0.0 && depth > 0.0; }
  [[nodiscard]] ConvexPolygon polygon() const;

  friend bool operator==(const SlotSpec &, const SlotSpec &) = default;
};

/// Body rectangle at a pose: corners at local x in {-rear, +front}, y in {-hw, +hw}.
[[nodiscard]] ConvexPolygon footprint_polygon(const Pose2 & pose, const FootprintSpec & fp);

/// Oriented rectangle centered at `center` with the given extents along and across the heading.
[[nodiscard]] ConvexPolygon oriented_rectangle(const Pose2 & center, double length, double width);

/// Area of the intersection of two convex polygons (Sutherland-Hodgman clipping).
[[nodiscard]] double convex_intersection_area(const ConvexPolygon & a, const ConvexPolygon & b);

/// Clip `subject` against convex `clip`; returns the (possibly empty) clipped vertex ring.
[[nodiscard]] std::vector<Vec2> clip_convex(std::span<const Vec2> subject, const ConvexPolygon & clip);

}  // namespace segpark
