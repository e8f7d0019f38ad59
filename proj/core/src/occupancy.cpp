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

#include "segpark/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segpark
{

OccupancyGrid::OccupancyGrid(const GridSpec & spec)
: spec_(spec)
{
  if (!spec.valid()) {
    throw std::invalid_argument("OccupancyGrid: invalid grid spec");
  }
  cells_.assign(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height), 0);
}

OccupancyGrid::OccupancyGrid(const GridSpec & spec, std::vector<std::uint8_t> cells)
: spec_(spec), cells_(std::move(cells))
{
  if (!spec.valid()) {
    throw std::invalid_argument("OccupancyGrid: invalid grid spec");
  }
  if (cells_.size() != static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height)) {
    throw std::invalid_argument("OccupancyGrid: cell count does not match dimensions");
  }
  for (auto & c : cells_) {
    c = c != 0 ? 1 : 0;
  }
}

Vec2 OccupancyGrid::cell_center(int ix, int iy) const noexcept
{
  return transform_point(
    spec_.origin, {(ix + 0.5) * spec_.resolution, (iy + 0.5) * spec_.resolution});
}

Vec2 OccupancyGrid::to_grid(Vec2 world) const noexcept
{
  const Vec2 local = point_in_frame(world, spec_.origin);
  return {local.x / spec_.resolution, local.y / spec_.resolution};
}

std::size_t OccupancyGrid::count_occupied() const noexcept
{
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

CellRange cells_covering(const OccupancyGrid & grid, std::span<const Vec2> points)
{
  CellRange range;
  if (points.empty()) {
    return range;
  }
  double gx0 = INFINITY, gy0 = INFINITY, gx1 = -INFINITY, gy1 = -INFINITY;
  for (const auto & p : points) {
    const Vec2 g = grid.to_grid(p);
    gx0 = std::min(gx0, g.x);
    gy0 = std::min(gy0, g.y);
    gx1 = std::max(gx1, g.x);
    gy1 = std::max(gy1, g.y);
  }
  // Cell i has its center at i + 0.5.
  range.x0 = std::max(0, static_cast<int>(std::floor(gx0 - 0.5)));
  range.y0 = std::max(0, static_cast<int>(std::floor(gy0 - 0.5)));
  range.x1 = std::min(grid.width() - 1, static_cast<int>(std::ceil(gx1 - 0.5)));
  range.y1 = std::min(grid.height() - 1, static_cast<int>(std::ceil(gy1 - 0.5)));
  return range;
}

void rasterize_into(OccupancyGrid & grid, const ConvexPolygon & polygon)
{
  const CellRange r = cells_covering(grid, polygon.vertices());
  for (int iy = r.y0; iy <= r.y1; ++iy) {
    for (int ix = r.x0; ix <= r.x1; ++ix) {
      if (polygon.contains(grid.cell_center(ix, iy))) {
        grid.set(ix, iy, true);
      }
    }
  }
}

OccupancyGrid rasterize_obstacles(std::span<const ConvexPolygon> polygons, const GridSpec & spec)
{
  OccupancyGrid grid(spec);
  for (const auto & poly : polygons) {
    rasterize_into(grid, poly);
  }
  return grid;
}

}  // namespace segpark
