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

namespace segpark
{

enum class Gear : int { kForward = 1, kBackward = -1 };

[[nodiscard]] constexpr int sign(Gear g) noexcept { return static_cast<int>(g); }
[[nodiscard]] constexpr Gear opposite(Gear g) noexcept
{
  return g == Gear::kForward ? Gear::kBackward : Gear::kForward;
}
/// Gear slot index used by the decoder: 0 = forward, 1 = backward.
[[nodiscard]] constexpr int gear_slot(Gear g) noexcept { return g == Gear::kForward ? 0 : 1; }
[[nodiscard]] constexpr Gear gear_of_slot(int slot) noexcept
{
  return slot == 0 ? Gear::kForward : Gear::kBackward;
}

struct PathConfig
{
  int n_segments{4};
  int n_pieces{10};
  double kappa_max{0.2};
  double ds_min{0.02};
  double ds_max{1.0};

  [[nodiscard]] bool valid() const noexcept;
  [[nodiscard]] double min_length() const noexcept { return n_pieces * ds_min; }
  [[nodiscard]] double max_length() const noexcept { return n_pieces * ds_max; }
};

/// One segment's control: per-piece arc length, N_p curvatures and a gear.
struct CurvatureChunk
{
  double delta_s{0.5};
  std::vector<double> curvatures;
  Gear gear{Gear::kForward};

  [[nodiscard]] double total_length() const noexcept
  {
    return delta_s * static_cast<double>(curvatures.size());
  }
  [[nodiscard]] double mean_curvature() const noexcept;
  [[nodiscard]] bool satisfies(const PathConfig & cfg, double tol = 1e-12) const noexcept;

  friend bool operator==(const CurvatureChunk &, const CurvatureChunk &) = default;
};

struct Segment
{
  std::vector<Pose2> waypoints;  // N_p + 1 poses, index 0 is the start
  Gear gear{Gear::kForward};
  bool valid{true};

  [[nodiscard]] const Pose2 & start() const { return waypoints.front(); }
  [[nodiscard]] const Pose2 & end() const { return waypoints.back(); }

  friend bool operator==(const Segment &, const Segment &) = default;
};

struct ParkingPath
{
  std::vector<Segment> segments;
  double score{1.0};

  [[nodiscard]] int n_valid() const noexcept;
  /// Gear alternation and trailing-invalid invariants.
  [[nodiscard]] bool well_formed() const noexcept;
  /// End of the last valid segment; `fallback` when no segment is valid.
  [[nodiscard]] Pose2 final_pose(const Pose2 & fallback) const;
  /// Waypoints 1..N_p of every valid segment (segment starts are not repeated).
  [[nodiscard]] std::vector<Pose2> driven_waypoints() const;

  friend bool operator==(const ParkingPath &, const ParkingPath &) = default;
};

/// Integration state with an unwrapped heading: {x, y, psi}.
using RawPose = std::array<double, 3>;

[[nodiscard]] inline RawPose to_raw(const Pose2 & p) noexcept { return {p.x(), p.y(), p.psi()}; }
[[nodiscard]] inline Pose2 from_raw(const RawPose & p) noexcept { return {p[0], p[1], p[2]}; }

/// Two-stage RK step of the arc-length kinematics dx/ds = g cos psi, dy/ds = g sin psi,
/// dpsi/ds = g kappa (Ralston weights: stage at 2/3 of the step, weights 1/4 and 3/4).
[[nodiscard]] RawPose rk2_step(const RawPose & state, double step, double kappa, int gear) noexcept;

/// Integrate all pieces; `out` must hold curvatures.size() + 1 poses.
void integrate_raw(
  const RawPose & start, double delta_s, std::span<const double> curvatures, int gear,
  std::span<RawPose> out) noexcept;

/// Reverse-mode sweep through integrate_raw. `waypoint_grads[k]` is dL/d(out[k]); gradients are
/// accumulated (+=) into the outputs.
void integrate_raw_adjoint(
  const RawPose & start, double delta_s, std::span<const double> curvatures, int gear,
  std::span<const RawPose> waypoint_grads, RawPose & start_grad, double & delta_s_grad,
  std::span<double> curvature_grads) noexcept;

/// Integrate a chunk from `start`. Throws std::invalid_argument on non-finite input.
[[nodiscard]] Segment integrate_chunk(const Pose2 & start, const CurvatureChunk & chunk);

/// Arc-length stations at which fit_chunk_from_waypoints samples the polyline.
[[nodiscard]] std::vector<double> resample_stations(std::span<const Pose2> waypoints, int n_pieces);

/// Encode a ground-truth waypoint polyline into the chunk space. Throws AmbiguousGear when the
/// longitudinal motion changes sign and std::invalid_argument on precondition violations.
[[nodiscard]] CurvatureChunk fit_chunk_from_waypoints(
  std::span<const Pose2> waypoints, const PathConfig & cfg);

struct PathStats
{
  double total_length{0.0};
  int n_valid_segments{0};
  double max_abs_curvature{0.0};
};

[[nodiscard]] PathStats path_stats(const ParkingPath & path);

}  // namespace segpark
