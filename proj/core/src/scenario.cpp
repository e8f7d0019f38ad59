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

#include "segpark/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <random>
#include <stdexcept>

#include "segpark/errors.hpp"
#include "segpark/esdf.hpp"

namespace segpark
{
namespace
{

struct DensityProfile
{
  double aisle_lo;
  double aisle_hi;
  double second_row_prob;
  double opposite_car_prob;
  int pillars_lo;
  int pillars_hi;
};

DensityProfile density(Difficulty d) noexcept
{
  switch (d) {
    case Difficulty::kNormal:
      return {6.5, 7.5, 0.3, 0.6, 0, 1};
    case Difficulty::kComplex:
      return {6.0, 6.8, 0.6, 0.8, 1, 2};
    case Difficulty::kExtreme:
      return {5.5, 6.2, 0.9, 0.95, 2, 3};
  }
  return {6.5, 7.5, 0.3, 0.6, 0, 1};
}

class Sampler
{
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

private:
  std::mt19937_64 rng_;
};

struct Layout
{
  SlotSpec slot;
  std::vector<ConvexPolygon> obstacles;
};

// Rectangle given in a frame: center (u, v) along/across the frame heading.
ConvexPolygon frame_rect(const Pose2 & frame, double u, double v, double length, double width)
{
  return oriented_rectangle(compose(frame, Pose2(u, v, 0.0)), length, width);
}

ConvexPolygon world_rect(double x0, double y0, double x1, double y1)
{
  return ConvexPolygon::rectangle(x0, y0, x1, y1);
}

void add_opposite_row(Layout & layout, Sampler & s, const DensityProfile & dp, double y_edge,
                      double x_lo, double x_hi)
{
  if (s.chance(0.25)) {
    layout.obstacles.push_back(world_rect(x_lo, y_edge, x_hi, y_edge + 0.3));
    return;
  }
  double x = x_lo + s.uniform(0.0, 1.5);
  while (x < x_hi) {
    const double width = s.uniform(1.8, 2.0);
    if (s.chance(dp.opposite_car_prob)) {
      const double length = s.uniform(4.5, 4.9);
      const double inset = s.uniform(0.0, 0.3);
      layout.obstacles.push_back(
        world_rect(x, y_edge + inset, x + width, y_edge + inset + length));
    }
    x += width + s.uniform(0.5, 1.0);
  }
}

void add_pillars(Layout & layout, Sampler & s, const DensityProfile & dp, double y_row,
                 double y_opposite, double x_keepout_lo, double x_keepout_hi)
{
  const int count = s.integer(dp.pillars_lo, dp.pillars_hi);
  for (int i = 0; i < count; ++i) {
    double x = s.uniform(-18.0, 18.0);
    if (x > x_keepout_lo && x < x_keepout_hi) {
      x = s.chance(0.5) ? x_keepout_lo - s.uniform(0.5, 3.0) : x_keepout_hi + s.uniform(0.5, 3.0);
    }
    const double y = s.chance(0.5) ? y_row - 0.35 : y_opposite + 0.35;
    layout.obstacles.push_back(world_rect(x - 0.3, y - 0.3, x + 0.3, y + 0.3));
  }
}

Layout perpendicular_layout(Sampler & s, Difficulty d, const ScenarioConfig & cfg)
{
  const DensityProfile dp = density(d);
  const auto [c_lo, c_hi] = clearance_range(d);
  const double hw = cfg.footprint.half_width;
  const double clearance = s.uniform(c_lo, c_hi);
  const double depth = cfg.slot_depth;
  const double mouth = s.uniform(2.0, 2.3);
  const double x_slot = s.uniform(-2.0, 8.0);

  Layout layout;
  layout.slot.pose = Pose2(x_slot, -mouth - 0.5 * depth, 0.5 * std::numbers::pi);
  layout.slot.width = 2.0 * (hw + clearance);
  layout.slot.depth = depth;
  const Pose2 & frame = layout.slot.pose;

  double keep_lo = x_slot;
  double keep_hi = x_slot;
  for (int side : {-1, 1}) {
    const double gap = clearance + s.uniform(0.0, 0.15);
    const double width = s.uniform(1.8, 2.0);
    const double length = s.uniform(4.5, 4.9);
    const double u = 0.5 * depth - 0.5 * length - s.uniform(0.0, 0.4);
    double v = side * (hw + gap + 0.5 * width);
    layout.obstacles.push_back(frame_rect(frame, u, v, length, width));
    double outer = hw + gap + width;
    if (s.chance(dp.second_row_prob)) {
      const double gap2 = s.uniform(0.5, 1.0);
      const double width2 = s.uniform(1.8, 2.0);
      v = side * (outer + gap2 + 0.5 * width2);
      layout.obstacles.push_back(frame_rect(frame, u, v, s.uniform(4.5, 4.9), width2));
      outer += gap2 + width2;
    }
    // Frame v axis points to world -x.
    keep_lo = std::min(keep_lo, x_slot - side * outer);
    keep_hi = std::max(keep_hi, x_slot - side * outer);
  }
  // Back wall behind the row.
  const double y_back = -mouth - depth;
  layout.obstacles.push_back(world_rect(-20.5, y_back - 0.3, 20.5, y_back));

  const double y_opposite = -mouth + s.uniform(dp.aisle_lo, dp.aisle_hi);
  add_opposite_row(layout, s, dp, y_opposite, -20.5, 20.5);
  add_pillars(layout, s, dp, -mouth, y_opposite, keep_lo - 0.5, keep_hi + 0.5);
  return layout;
}

Layout parallel_layout(Sampler & s, Difficulty d, const ScenarioConfig & cfg)
{
  const DensityProfile dp = density(d);
  const auto [c_lo, c_hi] = clearance_range(d);
  const double hw = cfg.footprint.half_width;
  const double clearance = s.uniform(c_lo, c_hi);
  const double depth = cfg.slot_depth;
  const double mouth = s.uniform(1.8, 2.4);
  const double x_slot = s.uniform(0.5, 7.0);
  const double width = 2.0 * (hw + clearance);

  Layout layout;
  layout.slot.pose = Pose2(x_slot, -mouth - 0.5 * width, 0.0);
  layout.slot.width = width;
  layout.slot.depth = depth;

  const double y_curb = -mouth - width;
  layout.obstacles.push_back(world_rect(-20.5, y_curb - 0.3, 20.5, y_curb));

  const double y_center = layout.slot.pose.y();
  double keep_lo = x_slot - 0.5 * depth;
  double keep_hi = x_slot + 0.5 * depth;
  for (int side : {-1, 1}) {
    double edge = side > 0 ? keep_hi : keep_lo;
    int cars = 1 + (s.chance(dp.second_row_prob) ? 1 : 0);
    for (int i = 0; i < cars; ++i) {
      const double gap = s.uniform(0.8, 1.4) + (i > 0 ? 0.6 : 0.0);
      const double length = s.uniform(4.5, 4.9);
      const double nw = s.uniform(1.8, 2.0);
      const double x0 = side > 0 ? edge + gap : edge - gap - length;
      const double y_off = s.uniform(-0.1, 0.1);
      layout.obstacles.push_back(
        world_rect(x0, y_center + y_off - 0.5 * nw, x0 + length, y_center + y_off + 0.5 * nw));
      edge = side > 0 ? x0 + length : x0;
    }
    (side > 0 ? keep_hi : keep_lo) = edge;
  }
  const double y_opposite = -mouth + s.uniform(dp.aisle_lo, dp.aisle_hi);
  add_opposite_row(layout, s, dp, y_opposite, -20.5, 20.5);
  add_pillars(layout, s, dp, -mouth, y_opposite, keep_lo - 0.5, keep_hi + 0.5);
  return layout;
}

ConvexPolygon mirror_y(const ConvexPolygon & poly)
{
  std::vector<Vec2> v(poly.vertices().rbegin(), poly.vertices().rend());
  for (auto & p : v) {
    p.y = -p.y;
  }
  return ConvexPolygon(std::move(v));
}

}  // namespace

std::string_view to_string(Difficulty d) noexcept
{
  switch (d) {
    case Difficulty::kNormal:
      return "normal";
    case Difficulty::kComplex:
      return "complex";
    case Difficulty::kExtreme:
      return "extreme";
  }
  return "normal";
}

Difficulty difficulty_from_string(std::string_view name)
{
  if (name == "normal") {
    return Difficulty::kNormal;
  }
  if (name == "complex") {
    return Difficulty::kComplex;
  }
  if (name == "extreme") {
    return Difficulty::kExtreme;
  }
  throw std::invalid_argument("unknown difficulty: " + std::string(name));
}

std::pair<double, double> clearance_range(Difficulty d) noexcept
{
  switch (d) {
    case Difficulty::kNormal:
      return {0.8, 1.1};
    case Difficulty::kComplex:
      return {0.4, 0.7};
    case Difficulty::kExtreme:
      return {0.2, 0.35};
  }
  return {0.8, 1.1};
}

Scenario generate_scenario(std::uint64_t seed, Difficulty difficulty, const ScenarioConfig & config)
{
  Sampler sampler(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(difficulty) * 7919ULL + 1ULL);
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const SlotKind kind = config.kind.value_or(
      sampler.chance(0.5) ? SlotKind::kPerpendicular : SlotKind::kParallel);
    const bool left = sampler.chance(0.5);
    Layout layout = kind == SlotKind::kPerpendicular
                      ? perpendicular_layout(sampler, difficulty, config)
                      : parallel_layout(sampler, difficulty, config);
    if (left) {
      for (auto & poly : layout.obstacles) {
        poly = mirror_y(poly);
      }
      const Pose2 p = layout.slot.pose;
      layout.slot.pose = Pose2(p.x(), -p.y(), -p.psi());
    }

    Scenario sc;
    sc.id = seed;
    sc.difficulty = difficulty;
    sc.ego_start = Pose2(0.0, 0.0, 0.0);
    sc.slot = layout.slot;
    sc.grid = rasterize_obstacles(layout.obstacles, config.grid);

    // The whole slot must lie on the grid so its interior is observable.
    bool on_grid = true;
    const ConvexPolygon slot_poly = sc.slot.polygon();
    for (const auto & v : slot_poly.vertices()) {
      const Vec2 g = sc.grid.to_grid(v);
      on_grid = on_grid && g.x >= 0 && g.y >= 0 && g.x <= sc.grid.width() && g.y <= sc.grid.height();
    }
    if (!on_grid || !slot_interior_free(sc) ||
        exact_collision_check(sc.ego_start, config.footprint, sc.grid)) {
      continue;
    }
    return sc;
  }
  throw GenerationFailed(
    "generate_scenario: no valid layout after " + std::to_string(config.max_attempts) +
    " attempts (seed " + std::to_string(seed) + ")");
}

SlotKind slot_kind(const Scenario & scenario) noexcept
{
  const double rel = std::abs(wrap_angle(scenario.slot.pose.psi() - scenario.ego_start.psi()));
  return std::abs(rel - 0.5 * std::numbers::pi) < 0.25 * std::numbers::pi ? SlotKind::kPerpendicular
                                                                           : SlotKind::kParallel;
}

bool slot_interior_free(const Scenario & scenario)
{
  const ConvexPolygon slot = scenario.slot.polygon();
  const CellRange r = cells_covering(scenario.grid, slot.vertices());
  for (int iy = r.y0; iy <= r.y1; ++iy) {
    for (int ix = r.x0; ix <= r.x1; ++ix) {
      if (scenario.grid.occupied(ix, iy) && slot.contains(scenario.grid.cell_center(ix, iy))) {
        return false;
      }
    }
  }
  return true;
}

std::vector<float> slot_heatmap(const GridSpec & spec, const SlotSpec & slot, double sigma)
{
  const OccupancyGrid probe(spec);
  std::vector<float> heat(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height), 0.0F);
  const double reach = 3.0 * sigma;
  const Vec2 c = slot.pose.position();
  const std::array<Vec2, 2> box{{{c.x - reach, c.y - reach}, {c.x + reach, c.y + reach}}};
  std::array<Vec2, 4> corners{{box[0], {box[1].x, box[0].y}, box[1], {box[0].x, box[1].y}}};
  const CellRange r = cells_covering(probe, corners);
  for (int iy = r.y0; iy <= r.y1; ++iy) {
    for (int ix = r.x0; ix <= r.x1; ++ix) {
      const Vec2 d = probe.cell_center(ix, iy) - c;
      const double d2 = dot(d, d);
      if (d2 <= reach * reach) {
        heat[static_cast<std::size_t>(iy) * static_cast<std::size_t>(spec.width) + static_cast<std::size_t>(ix)] =
          static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
      }
    }
  }
  return heat;
}

double lateral_clearance(const Scenario & scenario, const FootprintSpec & fp, double cap)
{
  const OccupancyGrid & grid = scenario.grid;
  const double step = 0.5 * grid.resolution();
  double best = cap;
  constexpr int kStations = 7;
  for (int i = 0; i < kStations; ++i) {
    const double u = -fp.rear_overhang + (i + 0.5) * fp.length() / kStations;
    for (int side : {-1, 1}) {
      for (double t = 0.0; t < best; t += step) {
        const Vec2 w = transform_point(scenario.slot.pose, {u, side * (fp.half_width + t)});
        const Vec2 g = grid.to_grid(w);
        const int ix = static_cast<int>(std::floor(g.x));
        const int iy = static_cast<int>(std::floor(g.y));
        if (grid.in_bounds(ix, iy) && grid.occupied(ix, iy)) {
          best = std::min(best, t);
          break;
        }
      }
    }
  }
  return best;
}

}  // namespace segpark
