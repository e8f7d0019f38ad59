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

#include "segpark/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace segpark
{

double wrap_angle(double angle) noexcept
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(angle, two_pi);  // [-pi, pi]
  if (w <= -std::numbers::pi) {
    w += two_pi;
  }
  return w;
}

Pose2 compose(const Pose2 & parent_frame_pose, const Pose2 & local_pose) noexcept
{
  const double c = std::cos(parent_frame_pose.psi());
  const double s = std::sin(parent_frame_pose.psi());
  return {
    parent_frame_pose.x() + c * local_pose.x() - s * local_pose.y(),
    parent_frame_pose.y() + s * local_pose.x() + c * local_pose.y(),
    parent_frame_pose.psi() + local_pose.psi()};
}

Pose2 express_in_frame(const Pose2 & world_pose, const Pose2 & frame) noexcept
{
  const double c = std::cos(frame.psi());
  const double s = std::sin(frame.psi());
  const double dx = world_pose.x() - frame.x();
  const double dy = world_pose.y() - frame.y();
  return {c * dx + s * dy, -s * dx + c * dy, world_pose.psi() - frame.psi()};
}

Vec2 transform_point(const Pose2 & frame, Vec2 local) noexcept
{
  const double c = std::cos(frame.psi());
  const double s = std::sin(frame.psi());
  return {frame.x() + c * local.x - s * local.y, frame.y() + s * local.x + c * local.y};
}

Vec2 point_in_frame(Vec2 world, const Pose2 & frame) noexcept
{
  const double c = std::cos(frame.psi());
  const double s = std::sin(frame.psi());
  const double dx = world.x - frame.x();
  const double dy = world.y - frame.y();
  return {c * dx + s * dy, -s * dx + c * dy};
}

bool FootprintSpec::valid() const noexcept
{
  return front_overhang > 0.0 && rear_overhang > 0.0 && half_width > 0.0 &&
         front_overhang > rear_overhang && std::isfinite(front_overhang + rear_overhang + half_width);
}

double FootprintSpec::circumradius() const noexcept
{
  return std::hypot(std::max(front_overhang, rear_overhang), half_width);
}

bool FootprintSpec::contains_local(Vec2 p) const noexcept
{
  return p.x > -rear_overhang && p.x < front_overhang && p.y > -half_width && p.y < half_width;
}

double signed_area(std::span<const Vec2> polygon) noexcept
{
  const std::size_t n = polygon.size();
  if (n < 3) {
    return 0.0;
  }
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % n]);
  }
  return 0.5 * twice;
}

ConvexPolygon::ConvexPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices))
{
  const std::size_t n = vertices_.size();
  if (n < 3) {
    throw std::invalid_argument("ConvexPolygon needs at least 3 vertices");
  }
  for (const auto & v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw std::invalid_argument("ConvexPolygon vertex is not finite");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices_[i];
    const Vec2 b = vertices_[(i + 1) % n];
    const Vec2 c = vertices_[(i + 2) % n];
    if (cross(b - a, c - b) <= kTolerance) {
      throw std::invalid_argument("ConvexPolygon must be strictly convex and counter-clockwise");
    }
  }
  // A CCW ring that turns left at every vertex can still wind more than once.
  if (signed_area(vertices_) <= kTolerance) {
    throw std::invalid_argument("ConvexPolygon has non-positive area");
  }
  double turning = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = vertices_[(i + 1) % n] - vertices_[i];
    const Vec2 e1 = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
    turning += std::atan2(cross(e0, e1), dot(e0, e1));
  }
  if (turning > 2.0 * std::numbers::pi + 1e-6) {
    throw std::invalid_argument("ConvexPolygon winds more than once");
  }
}

double ConvexPolygon::area() const noexcept { return signed_area(vertices_); }

bool ConvexPolygon::contains(Vec2 p) const noexcept
{
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cross(vertices_[(i + 1) % n] - vertices_[i], p - vertices_[i]) <= 0.0) {
      return false;
    }
  }
  return true;
}

ConvexPolygon ConvexPolygon::rectangle(double x0, double y0, double x1, double y1)
{
  return ConvexPolygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

ConvexPolygon SlotSpec::polygon() const { return oriented_rectangle(pose, depth, width); }

ConvexPolygon footprint_polygon(const Pose2 & pose, const FootprintSpec & fp)
{
  const std::array<Vec2, 4> local{{
    {-fp.rear_overhang, -fp.half_width},
    {fp.front_overhang, -fp.half_width},
    {fp.front_overhang, fp.half_width},
    {-fp.rear_overhang, fp.half_width},
  }};
  std::vector<Vec2> world;
  world.reserve(4);
  for (const auto & p : local) {
    world.push_back(transform_point(pose, p));
  }
  return ConvexPolygon(std::move(world));
}

ConvexPolygon oriented_rectangle(const Pose2 & center, double length, double width)
{
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  std::vector<Vec2> world{
    transform_point(center, {-hl, -hw}), transform_point(center, {hl, -hw}),
    transform_point(center, {hl, hw}), transform_point(center, {-hl, hw})};
  return ConvexPolygon(std::move(world));
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, const ConvexPolygon & clip)
{
  std::vector<Vec2> output(subject.begin(), subject.end());
  const auto edges = clip.vertices();
  const std::size_t n = edges.size();
  for (std::size_t i = 0; i < n && !output.empty(); ++i) {
    const Vec2 a = edges[i];
    const Vec2 b = edges[(i + 1) % n];
    const Vec2 ab = b - a;
    std::vector<Vec2> input;
    input.swap(output);
    const std::size_t m = input.size();
    for (std::size_t j = 0; j < m; ++j) {
      const Vec2 p = input[j];
      const Vec2 q = input[(j + 1) % m];
      const double sp = cross(ab, p - a);
      const double sq = cross(ab, q - a);
      if (sp >= 0.0) {
        output.push_back(p);
      }
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        output.push_back(p + t * (q - p));
      }
    }
  }
  return output;
}

double convex_intersection_area(const ConvexPolygon & a, const ConvexPolygon & b)
{
  // Clip the smaller ring so the result is bit-identical regardless of argument order.
  const bool swap = a.area() > b.area() ||
                    (a.area() == b.area() && std::lexicographical_compare(
                                               b.vertices().begin(), b.vertices().end(),
                                               a.vertices().begin(), a.vertices().end(),
                                               [](Vec2 u, Vec2 v) {
                                                 return u.x < v.x || (u.x == v.x && u.y < v.y);
                                               }));
  const ConvexPolygon & subject = swap ? b : a;
  const ConvexPolygon & clipper = swap ? a : b;
  const auto ring = clip_convex(subject.vertices(), clipper);
  return std::max(0.0, signed_area(ring));
}

}  // namespace segpark
