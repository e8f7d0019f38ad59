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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "segpark/model.hpp"
#include "segpark/scenario.hpp"

namespace segpark
{

struct EpisodeMetrics
{
  double long_offset{0.0};  // m
  double lat_offset{0.0};   // m
  double orie_offset{0.0};  // deg
  double coverage{0.0};
  bool collided{false};
  double collision_prop{0.0};
  bool success{false};
  int n_waypoints{0};
  int n_colliding{0};
};

/// Final pose in the slot frame, footprint coverage of the slot rectangle, and exact collision
/// checks of every driven waypoint.
[[nodiscard]] EpisodeMetrics compute_metrics(
  const ParkingPath & path, const Scenario & scenario, const FootprintSpec & fp);

/// Index of the preferred candidate: collision-free first, then endpoint coverage, then score,
/// then fewer segments; the earlier candidate wins full ties. Throws NoValidCandidate when no
/// candidate has a valid segment.
[[nodiscard]] std::size_t select_path_index(
  std::span<const ParkingPath> candidates, const Scenario & scenario, const FootprintSpec & fp);
[[nodiscard]] ParkingPath select_path(
  std::span<const ParkingPath> candidates, const Scenario & scenario, const FootprintSpec & fp);

struct EpisodeResult
{
  std::uint64_t scenario_id{0};
  bool failed{false};
  std::string error;
  std::size_t selected{0};
  EpisodeMetrics metrics;
  ParkingPath path;
};

struct EvalConfig
{
  /// Average offsets over successful episodes only.
  bool offsets_success_only{false};
};

struct AggregateTable
{
  int episodes{0};
  int failures{0};
  double long_offset{0.0};
  double lat_offset{0.0};
  double orie_offset{0.0};
  double cover_rate{0.0};
  /// Share of episodes with any colliding waypoint.
  double coll_rate{0.0};
  /// Share of colliding waypoints over all evaluated waypoints.
  double coll_prop{0.0};
  double succ_rate{0.0};
  std::vector<EpisodeResult> results;
};

/// Episodes that failed count as zero coverage without collision and are left out of offsets.
[[nodiscard]] AggregateTable aggregate(std::vector<EpisodeResult> results, const EvalConfig & cfg = {});

/// Closed-loop argmax rollout, path selection and metrics over a scenario suite.
[[nodiscard]] AggregateTable run_closed_loop(
  const ModelParams & params, std::span<const Scenario> scenarios, const EvalConfig & cfg = {});

[[nodiscard]] nlohmann::json to_json(const AggregateTable & table);
/// Aligned plain-text rendering with percentages for the rate columns.
[[nodiscard]] std::string format_table(const AggregateTable & table);

/// Deterministic SVG: occupied cells, slot rectangle, waypoints colored by gear, final footprint,
/// and red markers at colliding waypoints.
[[nodiscard]] std::string render_svg(
  const Scenario & scenario, std::span<const ParkingPath> paths, const FootprintSpec & fp,
  const std::optional<EpisodeMetrics> & metrics = std::nullopt);

/// Writes render_svg output; throws IoError.
void emit_plot(
  const Scenario & scenario, std::span<const ParkingPath> paths, const FootprintSpec & fp,
  const std::optional<EpisodeMetrics> & metrics, const std::filesystem::path & out_path);

}  // namespace segpark
