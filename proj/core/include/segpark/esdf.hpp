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
#include <span>
#include <vector>

#include "segpark/geometry.hpp"
#include "segpark/occupancy.hpp"
#include "segpark/path_model.hpp"

namespace segpark
{

/// Ego-centric signed distance field of the vehicle body: negative inside, zero outside.
///
/// Grid nodes are laid out so the body boundary falls exactly on node lines; node spacing is the
/// largest value not above the requested resolution that divides the body extents. With one zero
/// margin node on every side, the bilinear surface is strictly negative exactly on the open body
/// interior and zero everywhere else.
class EgoEsdf
{
public:
  EgoEsdf(const FootprintSpec & fp, double resolution);

  struct Sample
  {
    double value{0.0};
    Vec2 gradient{};
  };

  /// Bilinear value and its exact derivative at a point in the vehicle frame.
  [[nodiscard]] Sample query(Vec2 point_ego) const noexcept;

  [[nodiscard]] const FootprintSpec & footprint() const noexcept { return fp_; }
  [[nodiscard]] double resolution() const noexcept { return resolution_; }
  [[nodiscard]] double spacing_x() const noexcept { return dx_; }
  [[nodiscard]] double spacing_y() const noexcept { return dy_; }
  [[nodiscard]] int nodes_x() const noexcept { return nx_; }
  [[nodiscard]] int nodes_y() const noexcept { return ny_; }
  /// Ego-frame position of node (i, j).
  [[nodiscard]] Vec2 node_position(int i, int j) const noexcept;
  [[nodiscard]] double node_value(int i, int j) const noexcept
  {
    return values_[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) +
                   static_cast<std::size_t>(i)];
  }

private:
  FootprintSpec fp_;
  double resolution_;
  double dx_{0.0};
  double dy_{0.0};
  int nx_{0};
  int ny_{0};
  std::vector<double> values_;
};

[[nodiscard]] EgoEsdf build_ego_esdf(const FootprintSpec & fp, double resolution);

/// Same as EgoEsdf::query, as a free function.
[[nodiscard]] EgoEsdf::Sample query_esdf(const EgoEsdf & esdf, Vec2 point_ego) noexcept;

struct CollisionLoss
{
  double loss{0.0};
  std::vector<RawPose> gradients;  // d loss / d (x, y, psi) per waypoint
};

/// Sum of squared EC-ESDF values of every obstacle point at every waypoint.
[[nodiscard]] CollisionLoss collision_loss(
  std::span<const Pose2> waypoints, std::span<const Vec2> obstacle_points_world,
  const EgoEsdf & esdf);

struct CollisionReport
{
  std::vector<bool> colliding;  // per waypoint
  int n_colliding_waypoints{0};
  double loss_value{0.0};
};

[[nodiscard]] CollisionReport collision_report(
  std::span<const Pose2> waypoints, std::span<const Vec2> obstacle_points_world,
  const EgoEsdf & esdf);

/// Ground truth: does any occupied cell center lie strictly inside the body at `pose`?
[[nodiscard]] bool exact_collision_check(
  const Pose2 & pose, const FootprintSpec & fp, const OccupancyGrid & grid);

/// Occupied cell centers of a grid.
[[nodiscard]] std::vector<Vec2> occupied_points(const OccupancyGrid & grid);

/// Accelerated exact collision queries and culled collision loss against one occupancy grid.
/// Holds a Euclidean distance transform over cell centers so free-space queries skip the per-cell
/// scan; answers are identical to exact_collision_check and collision_loss.
class ObstacleField
{
public:
  ObstacleField(OccupancyGrid grid, const FootprintSpec & fp);

  [[nodiscard]] const OccupancyGrid & grid() const noexcept { return grid_; }
  [[nodiscard]] const FootprintSpec & footprint() const noexcept { return fp_; }

  /// Distance from a world point to the nearest occupied cell center (lower bound when the point
  /// is not itself a cell center). Infinite when the grid is empty.
  [[nodiscard]] double clearance_lower_bound(Vec2 world) const noexcept;

  [[nodiscard]] bool collides(const Pose2 & pose) const;
  [[nodiscard]] bool collides(const RawPose & pose) const { return collides(from_raw(pose)); }

  /// Occupied cell centers strictly inside the body at `pose`.
  [[nodiscard]] std::vector<Vec2> points_inside(const Pose2 & pose) const;

  /// Collision loss of one pose against the whole grid; gradient accumulated into `grad`.
  double pose_loss(const RawPose & pose, const EgoEsdf & esdf, RawPose & grad) const;

private:
  [[nodiscard]] double edt_at_cell(int ix, int iy) const noexcept
  {
    return edt_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid_.width()) +
                static_cast<std::size_t>(ix)];
  }
  template <typename Fn>
  void for_each_candidate(const Pose2 & pose, double lx0, double lx1, Fn && fn) const;

  OccupancyGrid grid_;
  FootprintSpec fp_;
  std::vector<double> edt_;
  bool empty_{true};
};

}  // namespace segpark
