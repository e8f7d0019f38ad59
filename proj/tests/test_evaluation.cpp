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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "segpark/errors.hpp"
#include "segpark/esdf.hpp"
#include "segpark/evaluation.hpp"
#include "support.hpp"

using namespace segpark;
using segpark::testing::Gen;
using segpark::testing::sampled_coverage;

namespace
{

const FootprintSpec kFp{};

/// Body center of the rear-axle pose.
Pose2 body_center(const Pose2 & rear_axle)
{
  return compose(rear_axle, Pose2(0.5 * (kFp.front_overhang - kFp.rear_overhang), 0.0, 0.0));
}

ParkingPath straight_to(const Pose2 & start, const Pose2 & end)
{
  ParkingPath p;
  Segment s;
  s.waypoints = {start, end};
  p.segments.push_back(s);
  return p;
}

Scenario open_scene(const SlotSpec & slot)
{
  Scenario sc;
  sc.grid = OccupancyGrid(GridSpec{40, 40, 0.5, Pose2(-10.0, -10.0, 0.0)});
  sc.slot = slot;
  return sc;
}

}  // namespace

TEST(Metrics, HalfOverlappedFootprint)
{
  Gen gen(1);
  for (int trial = 0; trial < 4; ++trial) {
    const Pose2 end(gen.uniform(-2, 2), gen.uniform(-2, 2), gen.uniform(-3, 3));
    // Slot of body size shifted by half a body length, then by half a body width.
    const Pose2 along = compose(body_center(end), Pose2(0.5 * kFp.length(), 0.0, 0.0));
    const Pose2 across = compose(body_center(end), Pose2(0.0, kFp.half_width, 0.0));
    for (const Pose2 & slot_pose : {along, across}) {
      const SlotSpec slot{slot_pose, 2.0 * kFp.half_width, kFp.length()};
      const Scenario sc = open_scene(slot);
      const EpisodeMetrics m = compute_metrics(straight_to(Pose2{}, end), sc, kFp);
      EXPECT_NEAR(m.coverage, 0.5, 1e-9);
      EXPECT_NEAR(m.coverage, sampled_coverage(end, kFp, slot, 2e-3), 0.01);
      EXPECT_FALSE(m.success);
    }
  }
}

TEST(Metrics, CoverageMatchesSamplingOracle)
{
  Gen gen(2);
  for (int trial = 0; trial < 40; ++trial) {
    const Pose2 end = gen.pose(1.0);
    const SlotSpec slot{gen.pose(2.0), gen.uniform(1.5, 3.0), gen.uniform(4.0, 7.0)};
    const EpisodeMetrics m = compute_metrics(straight_to(Pose2{}, end), open_scene(slot), kFp);
    EXPECT_NEAR(m.coverage, sampled_coverage(end, kFp, slot, 1e-2), 0.01) << "trial " << trial;
  }
}

TEST(Metrics, OffsetsInSlotFrame)
{
  const SlotSpec slot{Pose2(3.0, 1.0, 0.5), 2.5, 7.4};
  const Pose2 end = compose(slot.pose, Pose2(-0.4, 0.25, -0.1));
  const EpisodeMetrics m = compute_metrics(straight_to(Pose2{}, end), open_scene(slot), kFp);
  EXPECT_NEAR(m.long_offset, 0.4, 1e-12);
  EXPECT_NEAR(m.lat_offset, 0.25, 1e-12);
  EXPECT_NEAR(m.orie_offset, 0.1 * 180.0 / std::numbers::pi, 1e-10);
}

TEST(Metrics, SuccessIffCoveredWithoutCollisionProperty)
{
  Gen gen(3);
  int successes = 0;
  int collisions = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Scenario sc;
    std::vector<std::uint8_t> cells(20 * 20, 0);
    for (int k = gen.integer(0, 6); k > 0; --k) {
      cells[static_cast<std::size_t>(gen.integer(0, 399))] = 1;
    }
    sc.grid = OccupancyGrid(GridSpec{20, 20, 1.0, Pose2(-10.0, -10.0, 0.0)}, cells);
    const Pose2 start = gen.pose(3.0);
    sc.ego_start = start;
    const Pose2 end = compose(start, Pose2(gen.uniform(-2, 2), gen.uniform(-1, 1), gen.uniform(-0.3, 0.3)));
    sc.slot = SlotSpec{compose(body_center(end), Pose2(gen.uniform(-0.5, 0.5), gen.uniform(-0.3, 0.3), gen.uniform(-0.1, 0.1))), 2.5, 5.4};
    ParkingPath p = straight_to(start, compose(start, Pose2(0.5, 0.0, 0.0)));
    Segment back;
    back.gear = Gear::kBackward;
    back.waypoints = {p.segments[0].end(), end};
    p.segments.push_back(back);
    const EpisodeMetrics m = compute_metrics(p, sc, kFp);
    ASSERT_EQ(m.n_waypoints, 2);
    int colliding = 0;
    for (const Pose2 & w : p.driven_waypoints()) {
      colliding += exact_collision_check(w, kFp, sc.grid) ? 1 : 0;
    }
    EXPECT_EQ(m.n_colliding, colliding);
    EXPECT_EQ(m.collided, colliding > 0);
    EXPECT_DOUBLE_EQ(m.collision_prop, colliding / 2.0);
    EXPECT_EQ(m.success, m.coverage > 0.9 && !m.collided);
    successes += m.success ? 1 : 0;
    collisions += m.collided ? 1 : 0;
  }
  // The generator has to exercise both outcomes.
  EXPECT_GT(successes, 0);
  EXPECT_GT(collisions, 0);
  EXPECT_LT(successes, 200);
}

TEST(Metrics, SegmentStartsAreNotRecounted)
{
  // Occupied cell under the ego start only.
  Scenario sc = open_scene(SlotSpec{Pose2(8.0, 0.0, 0.0), 2.5, 7.4});
  sc.grid.set(20, 20, true);
  const Pose2 start(sc.grid.cell_center(20, 20).x, sc.grid.cell_center(20, 20).y, 0.0);
  sc.ego_start = start;
  const EpisodeMetrics m = compute_metrics(straight_to(start, compose(start, Pose2(6.0, 0.0, 0.0))), sc, kFp);
  EXPECT_FALSE(m.collided);
  EXPECT_EQ(m.n_waypoints, 1);
}

TEST(Selection, PreferenceOrder)
{
  const SlotSpec slot{body_center(Pose2(5.0, 0.0, 0.0)), 2.5, 7.4};
  Scenario sc = open_scene(slot);
  // Obstacle only reachable by the candidate that drives left.
  const Vec2 cell = sc.grid.cell_center(20, 30);
  sc.grid.set(20, 30, true);
  const ParkingPath colliding = straight_to(Pose2{}, Pose2(cell.x, cell.y, 0.0));
  const ParkingPath parked = straight_to(Pose2{}, Pose2(5.0, 0.0, 0.0));
  const ParkingPath short_of = straight_to(Pose2{}, Pose2(3.0, 0.0, 0.0));
  ParkingPath empty = parked;
  empty.segments[0].valid = false;

  std::vector<ParkingPath> c{colliding, short_of, parked, empty};
  EXPECT_EQ(select_path_index(c, sc, kFp), 2u);

  // Equal coverage: the higher score wins, then fewer segments, then the earlier candidate.
  ParkingPath a = parked;
  ParkingPath b = parked;
  b.score = 2.0;
  c = {a, b};
  EXPECT_EQ(select_path_index(c, sc, kFp), 1u);
  ParkingPath longer = parked;
  Segment extra = longer.segments[0];
  extra.gear = Gear::kBackward;
  extra.waypoints = {parked.segments[0].end(), parked.segments[0].end()};
  longer.segments.push_back(extra);
  c = {longer, a};
  EXPECT_EQ(select_path_index(c, sc, kFp), 1u);
  c = {a, a};
  EXPECT_EQ(select_path_index(c, sc, kFp), 0u);
  EXPECT_EQ(select_path(c, sc, kFp), a);

  // A colliding candidate still beats having nothing.
  c = {empty, colliding};
  EXPECT_EQ(select_path_index(c, sc, kFp), 1u);
  c = {empty};
  EXPECT_THROW((void)select_path_index(c, sc, kFp), NoValidCandidate);
  EXPECT_THROW((void)select_path_index({}, sc, kFp), NoValidCandidate);
}

TEST(Aggregate, RatesAndFailures)
{
  std::vector<EpisodeResult> rs(4);
  rs[0].metrics = {0.1, 0.2, 3.0, 1.0, false, 0.0, true, 10, 0};
  rs[1].metrics = {0.5, 0.4, 9.0, 0.8, true, 0.0, false, 10, 3};
  rs[2].metrics = {0.3, 0.0, 0.0, 0.95, false, 0.0, true, 20, 0};
  rs[3].failed = true;
  rs[3].error = "boom";
  const AggregateTable t = aggregate(rs);
  EXPECT_EQ(t.episodes, 4);
  EXPECT_EQ(t.failures, 1);
  EXPECT_DOUBLE_EQ(t.cover_rate, (1.0 + 0.8 + 0.95) / 4);
  EXPECT_DOUBLE_EQ(t.coll_rate, 0.25);
  EXPECT_DOUBLE_EQ(t.succ_rate, 0.5);
  EXPECT_DOUBLE_EQ(t.coll_prop, 3.0 / 40.0);
  EXPECT_DOUBLE_EQ(t.long_offset, 0.3);
  EXPECT_DOUBLE_EQ(t.orie_offset, 4.0);
  EXPECT_EQ(t.results.size(), 4u);

  const AggregateTable s = aggregate(rs, EvalConfig{true});
  EXPECT_DOUBLE_EQ(s.long_offset, 0.2);
  EXPECT_DOUBLE_EQ(s.lat_offset, 0.1);

  const AggregateTable none = aggregate({});
  EXPECT_EQ(none.episodes, 0);
  EXPECT_EQ(none.succ_rate, 0.0);
}

TEST(Aggregate, JsonAndTable)
{
  std::vector<EpisodeResult> rs(2);
  rs[0].scenario_id = 7;
  rs[0].metrics = {0.1, 0.2, 3.0, 1.0, false, 0.0, true, 10, 0};
  rs[1].scenario_id = 8;
  rs[1].failed = true;
  rs[1].error = "no candidate";
  const AggregateTable t = aggregate(rs);
  const auto j = to_json(t);
  EXPECT_EQ(j["episodes"], 2);
  EXPECT_EQ(j["results"][0]["scenario_id"], 7);
  EXPECT_EQ(j["results"][0]["success"], true);
  EXPECT_EQ(j["results"][1]["error"], "no candidate");
  EXPECT_FALSE(j["results"][1].contains("coverage"));
  const std::string table = format_table(t);
  EXPECT_NE(table.find("Succ.(%)"), std::string::npos);
  EXPECT_NE(table.find("50.00"), std::string::npos);
}

TEST(Plot, DeterministicSvgWithCollisionMarkers)
{
  Scenario sc = open_scene(SlotSpec{body_center(Pose2(5.0, 0.0, 0.0)), 2.5, 7.4});
  sc.grid.set(22, 20, true);
  const ParkingPath p = straight_to(Pose2{}, Pose2(0.5, 0.0, 0.0));
  const std::vector<ParkingPath> paths{p};
  const EpisodeMetrics m = compute_metrics(p, sc, kFp);
  ASSERT_TRUE(m.collided);
  const std::string a = render_svg(sc, paths, kFp, m);
  EXPECT_EQ(a, render_svg(sc, paths, kFp, m));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("class=\"collision\""), std::string::npos);
  EXPECT_NE(a.find("class=\"slot\""), std::string::npos);
  EXPECT_NE(a.find("class=\"cell\""), std::string::npos);
  EXPECT_NE(a.find("collided yes"), std::string::npos);

  const auto out = std::filesystem::temp_directory_path() / "segpark_plot_test.svg";
  emit_plot(sc, paths, kFp, m, out);
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), a);
  std::filesystem::remove(out);
  EXPECT_THROW(emit_plot(sc, paths, kFp, m, "/nonexistent-dir/x.svg"), IoError);
}

TEST(ClosedLoop, ConsistentAndDeterministic)
{
  const ModelConfig mc = segpark::testing::micro_config();
  const ModelParams params(mc, 3);
  std::vector<Scenario> scenes;
  for (std::uint64_t s = 0; s < 4; ++s) {
    scenes.push_back(segpark::testing::micro_record(s, true).scenario);
  }
  const AggregateTable a = run_closed_loop(params, scenes);
  const AggregateTable b = run_closed_loop(params, scenes);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  ASSERT_EQ(a.results.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const EpisodeResult & r = a.results[i];
    EXPECT_EQ(r.scenario_id, scenes[i].id);
    if (r.failed) {
      continue;
    }
    const EpisodeMetrics m = compute_metrics(r.path, scenes[i], mc.footprint);
    EXPECT_EQ(m.success, r.metrics.success);
    EXPECT_EQ(r.metrics.success, r.metrics.coverage > 0.9 && !r.metrics.collided);
  }
}
