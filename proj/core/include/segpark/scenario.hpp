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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "segpark/geometry.hpp"
#include "segpark/occupancy.hpp"
#include "segpark/path_model.hpp"

namespace segpark
{

enum class Difficulty : std::uint8_t { kNormal = 0, kComplex = 1, kExtreme = 2 };

[[nodiscard]] std::string_view to_string(Difficulty d) noexcept;
/// Throws std::invalid_argument for unknown names.
[[nodiscard]] Difficulty difficulty_from_string(std::string_view name);

enum class SlotKind : std::uint8_t { kPerpendicular = 0, kParallel = 1 };

struct Scenario
{
  std::uint64_t id{0};
  OccupancyGrid grid;
  SlotSpec slot;
  Pose2 ego_start;
  Difficulty difficulty{Difficulty::kNormal};

  friend bool operator==(const Scenario &, const Scenario &) = default;
};

struct DatasetRecord
{
  Scenario scenario;
  ParkingPath expert_path;
};

/// Knobs of the synthetic parking-lot generator.
struct ScenarioConfig
{
  GridSpec grid{};
  FootprintSpec footprint{};
  /// Slot extent along its heading; the default holds the body with the rear axle at the center.
  double slot_depth{7.4};
  /// Restrict generation to one slot kind (both kinds when unset).
  std::optional<SlotKind> kind;
  int max_attempts{100};
};

/// Minimum lateral clearance range [lo, hi] per difficulty, in meters.
[[nodiscard]] std::pair<double, double> clearance_range(Difficulty d) noexcept;

/// Deterministic scenario from a seed. Throws GenerationFailed after `max_attempts` rejections.
[[nodiscard]] Scenario generate_scenario(
  std::uint64_t seed, Difficulty difficulty, const ScenarioConfig & config = {});

/// Slot kind implied by a scenario's slot heading relative to the ego start.
[[nodiscard]] SlotKind slot_kind(const Scenario & scenario) noexcept;

/// Gaussian bump at the slot pose rasterized on the scenario grid, truncated at 3 sigma.
[[nodiscard]] std::vector<float> slot_heatmap(
  const GridSpec & spec, const SlotSpec & slot, double sigma = 0.5);

/// Smallest free lateral distance from the parked body's sides to an occupied cell, found by
/// marching rays across the slot in grid-resolution steps; capped at `cap`.
[[nodiscard]] double lateral_clearance(
  const Scenario & scenario, const FootprintSpec & fp, double cap = 3.0);

/// True when no occupied cell center lies inside the slot rectangle.
[[nodiscard]] bool slot_interior_free(const Scenario & scenario);

/// Binary dataset file ("MPK1" magic, JSON header line, length-prefixed records).
void save_dataset(
  const std::vector<DatasetRecord> & records, const std::filesystem::path & path,
  const std::string & header_json = "{}");

struct LoadedDataset
{
  std::string header_json;
  std::vector<DatasetRecord> records;
};

/// Throws IoError when the file cannot be read and FormatError (naming the record) when malformed.
[[nodiscard]] LoadedDataset load_dataset(const std::filesystem::path & path);

/// Record payload codec, exposed for tests.
[[nodiscard]] std::vector<std::uint8_t> encode_record(const DatasetRecord & record);
[[nodiscard]] DatasetRecord decode_record(std::span<const std::uint8_t> payload, std::size_t index);

}  // namespace segpark
