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
#include <span>
#include <vector>

#include "segpark/geometry.hpp"

namespace segpark
{

/// Dimensions and placement of a grid; `origin` is the world pose of the corner of cell (0, 0).
struct GridSpec
{
  int width{800};
  int height{400};
  double resolution{0.05};
  Pose2 origin{-20.0, -10.0, 0.0};

  [[nodiscard]] bool valid() const noexcept { return width > 0 && height > 0 && resolution > 0.0; }
  friend bool operator==(const GridSpec &, const GridSpec &) = default;
};

/// Boolean occupancy raster, row-major with x varying fastest.
class OccupancyGrid
{
public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridSpec & spec);
  OccupancyGrid(const GridSpec & spec, std::vector<std::uint8_t> cells);

  [[nodiscard]] const GridSpec & spec() const noexcept { return spec_; }
  [[nodiscard]] int width() const noexcept { return spec_.width; }
  [[nodiscard]] int height() const noexcept { return spec_.height; }
  [[nodiscard]] double resolution() const noexcept { return spec_.resolution; }
  [[nodiscard]] const Pose2 & origin() const noexcept { return spec_.origin; }

  [[nodiscard]] bool occupied(int ix, int iy) const noexcept
  {
    return cells_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(spec_.width) +
                  static_cast<std::size_t>(ix)] != 0;
  }
  void set(int ix, int iy, bool value) noexcept
  {
    cells_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(spec_.width) +
           static_cast<std::size_t>(ix)] = value ? 1 : 0;
  }
  [[nodiscard]] bool in_bounds(int ix, int iy) const noexcept
  {
    return ix >= 0 && iy >= 0 && ix < spec_.width && iy < spec_.height;
  }

  /// World position of a cell center.
  [[nodiscard]] Vec2 cell_center(int ix, int iy) const noexcept;
  /// Continuous grid coordinates (cell units, cell (i, j) spans [i, i+1) x [j, j+1)).
  [[nodiscard]] Vec2 to_grid(Vec2 world) const noexcept;

  [[nodiscard]] std::span<const std::uint8_t> cells() const noexcept { return cells_; }
  [[nodiscard]] std::size_t count_occupied() const noexcept;

  friend bool operator==(const OccupancyGrid &, const OccupancyGrid &) = default;

private:
  GridSpec spec_{};
  std::vector<std::uint8_t> cells_;
};

/// Mark every cell whose center lies strictly inside any polygon.
[[nodiscard]] OccupancyGrid rasterize_obstacles(
  std::span<const ConvexPolygon> polygons, const GridSpec & spec);

/// Add polygons to an existing grid in place.
void rasterize_into(OccupancyGrid & grid, const ConvexPolygon & polygon);

/// Inclusive cell index range covering a world-space axis-aligned box, clamped to the grid.
struct CellRange
{
  int x0{0};
  int y0{0};
  int x1{-1};
  int y1{-1};
  [[nodiscard]] bool empty() const noexcept { return x1 < x0 || y1 < y0; }
};

[[nodiscard]] CellRange cells_covering(const OccupancyGrid & grid, std::span<const Vec2> points);

}  // namespace segpark
