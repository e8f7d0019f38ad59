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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "segpark/errors.hpp"
#include "segpark/esdf.hpp"
#include "segpark/expert.hpp"
#include "segpark/scenario.hpp"
#include "support.hpp"

using namespace segpark;

namespace
{

double coverage(const ParkingPath & p, const Scenario & sc, const FootprintSpec & fp)
{
  return convex_intersection_area(footprint_polygon(p.final_pose(sc.ego_start), fp), sc.slot.polygon()) / fp.area();
}

Scenario empty_lot_slot_behind()
{
  Scenario sc;
  sc.grid = OccupancyGrid(GridSpec{});
  sc.ego_start = Pose2(0, 0, 0);
  sc.slot = SlotSpec{Pose2(-6.0, 0.0, 0.0), 2.5, 7.4};
  return sc;
}

}  // namespace

TEST(ExactArc, MatchesClosedForm)
{
  const RawPose e = exact_arc({0, 0, 0}, 5.0, 0.2, 1);
  EXPECT_NEAR(e[0], std::sin(1.0) / 0.2, 1e-12);
  EXPECT_NEAR(e[1], (1 - std::cos(1.0)) / 0.2, 1e-12);
  EXPECT_NEAR(e[2], 1.0, 1e-12);
  const RawPose s = exact_arc({1, 2, 0.5}, 3.0, 0.0, -1);
  EXPECT_NEAR(s[0], 1 - 3 * std::cos(0.5), 1e-12);
  EXPECT_NEAR(s[1], 2 - 3 * std::sin(0.5), 1e-12);
}

TEST(Connector, ReachesIntegratedTargets)
{
  segpark::testing::Gen gen(53);
  const PathConfig cfg;
  int solved = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const Gear g = gen.coin() ? Gear::kForward : Gear::kBackward;
    const Pose2 from = gen.pose(5.0);
    CurvatureChunk c = gen.chunk(cfg, g);
    const double k = gen.uniform(-0.15, 0.15);
    std::fill(c.curvatures.begin(), c.curvatures.end(), k);
    c.delta_s = gen.uniform(0.2, 0.9);
    const Pose2 to = integrate_chunk(from, c).end();
    const auto sol = solve_connector(from, to, g, cfg);
    if (!sol) {
      continue;
    }
    ++solved;
    EXPECT_TRUE(sol->satisfies(cfg));
    EXPECT_EQ(sol->gear, g);
    const Pose2 end = integrate_chunk(from, *sol).end();
    EXPECT_NEAR(end.x(), to.x(), 1e-3);
    EXPECT_NEAR(end.y(), to.y(), 1e-3);
    EXPECT_NEAR(wrap_angle(end.psi() - to.psi()), 0.0, 1e-3);
  }
  EXPECT_GE(solved, n * 95 / 100);
}

TEST(Expert, EmptyLotSlotBehindIsOneReverse)
{
  const Scenario sc = empty_lot_slot_behind();
  const ParkingPath p = plan_expert(sc, PathConfig{});
  EXPECT_EQ(p.n_valid(), 1);
  EXPECT_EQ(p.segments.front().gear, Gear::kBackward);
  EXPECT_GE(coverage(p, sc, FootprintSpec{}), 0.95);
  EXPECT_TRUE(p.well_formed());
}

TEST(Expert, WalledMouthHasNoPath)
{
  Scenario sc = empty_lot_slot_behind();
  const Pose2 & s = sc.slot.pose;
  const Pose2 mouth(s.x() + 3.9 * std::cos(s.psi()), s.y() + 3.9 * std::sin(s.psi()), s.psi());
  rasterize_into(sc.grid, oriented_rectangle(mouth, 0.3, 4.0));
  ExpertConfig cfg;
  cfg.max_nodes_per_depth = 150;
  EXPECT_THROW((void)plan_expert(sc, PathConfig{}, cfg), NoPathFound);
}

TEST(Expert, GeneratedScenariosSatisfyContract)
{
  const PathConfig cfg;
  const FootprintSpec fp;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Scenario sc = generate_scenario(seed, Difficulty::kNormal);
    ParkingPath p;
    try {
      p = plan_expert(sc, cfg);
    } catch (const NoPathFound &) {
      continue;
    }
    ++solved;
    EXPECT_TRUE(p.well_formed());
    EXPECT_LE(p.n_valid(), cfg.n_segments);
    const ObstacleField field(sc.grid, fp);
    EXPECT_FALSE(path_sweep_collides(p, field, 0.1));
    for (const auto & seg : p.segments) {
      for (const auto & w : seg.waypoints) {
        EXPECT_FALSE(exact_collision_check(w, fp, sc.grid));
      }
    }
    EXPECT_GE(coverage(p, sc, fp), 0.95);
    EXPECT_EQ(plan_expert(sc, cfg), p);
  }
  EXPECT_GE(solved, 6);
}

TEST(Expert, TightParallelSlotNeedsGearChanges)
{
  const PathConfig cfg;
  const FootprintSpec fp;
  ScenarioConfig sc_cfg;
  sc_cfg.kind = SlotKind::kParallel;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 30 && checked < 2; ++seed) {
    const Scenario sc = generate_scenario(seed, Difficulty::kComplex, sc_cfg);
    ParkingPath p;
    try {
      p = plan_expert(sc, cfg);
    } catch (const NoPathFound &) {
      continue;
    }
    // Brute force: no single connector from the start into the slot is sweep-free.
    const ObstacleField field(sc.grid, fp);
    bool single_ok = false;
    for (Gear g : {Gear::kForward, Gear::kBackward}) {
      const auto c = solve_connector(sc.ego_start, sc.slot.pose, g, cfg);
      if (c) {
        ParkingPath one;
        one.segments.push_back(integrate_chunk(sc.ego_start, *c));
        single_ok = single_ok || !path_sweep_collides(one, field, 0.1);
      }
    }
    if (single_ok) {
      continue;
    }
    ++checked;
    EXPECT_GE(p.n_valid(), 2);
  }
  EXPECT_GE(checked, 1);
}
