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

#include <cstdint>
#include <optional>
#include <vector>

#include "segpark/esdf.hpp"
#include "segpark/path_model.hpp"
#include "segpark/scenario.hpp"

namespace segpark
{

/// Search limits of the privileged planner.
struct ExpertConfig
{
  FootprintSpec footprint{};
  double length_step{0.25};
  double max_primitive_length{10.0};
  double sweep_spacing{0.1};
  /// Nodes expanded per search depth.
  int max_nodes_per_depth{600};
  /// Feasible candidates collected at the first successful depth before picking the shortest.
  int max_candidates{24};
  double dedupe_xy{0.25};
  double dedupe_psi{0.12};
};

/// Pose reached after driving `arc` meters (signed by gear) on a constant-curvature arc.
[[nodiscard]] RawPose exact_arc(const RawPose & start, double arc, double kappa, int gear) noexcept;

/// One chunk with a smooth bounded curvature profile whose RK2 integration from `from`
/// ends at `to` (position within 1e-9 m). Empty when no chunk within the path bounds exists.
[[nodiscard]] std::optional<CurvatureChunk> solve_connector(
  const Pose2 & from, const Pose2 & to, Gear gear, const PathConfig & cfg);

/// True when any waypoint of a valid segment, or any pose sampled at `spacing` along the arc
/// joining consecutive waypoints, collides.
[[nodiscard]] bool path_sweep_collides(
  const ParkingPath & path, const ObstacleField & field, double spacing);

/// Multi-segment parking path built by searching pull-out maneuvers from the slot and
/// connecting the outermost one to the ego start. Throws NoPathFound when the search is exhausted.
[[nodiscard]] ParkingPath plan_expert(
  const Scenario & scenario, const PathConfig & cfg, const ExpertConfig & expert = {});

/// Same search against a prebuilt obstacle field (reused across calls).
[[nodiscard]] ParkingPath plan_expert(
  const Scenario & scenario, const ObstacleField & field, const PathConfig & cfg,
  const ExpertConfig & expert = {});

/// `count` records from consecutive generation seeds starting at `first_seed`; seeds whose
/// scenario or expert search fails are skipped. Output is identical for any `jobs` >= 1.
[[nodiscard]] std::vector<DatasetRecord> generate_records(
  std::uint64_t first_seed, int count, Difficulty difficulty, const PathConfig & cfg,
  const ScenarioConfig & scenario_cfg = {}, const ExpertConfig & expert = {}, int jobs = 1);

}  // namespace segpark
