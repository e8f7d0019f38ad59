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

#include <benchmark/benchmark.h>

#include <random>

#include "segpark/esdf.hpp"
#include "segpark/expert.hpp"
#include "segpark/geometry.hpp"
#include "segpark/micro.hpp"
#include "segpark/model.hpp"
#include "segpark/path_model.hpp"
#include "segpark/scenario.hpp"
#include "segpark/training.hpp"

namespace
{

using namespace segpark;

ModelConfig bench_model()
{
  ModelConfig mc;
  mc.patch = 40;
  return mc;
}

void BM_IntegrateChunk(benchmark::State & state)
{
  CurvatureChunk c;
  c.delta_s = 0.5;
  c.curvatures.assign(static_cast<std::size_t>(state.range(0)), 0.15);
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_chunk(Pose2(), c));
  }
}
BENCHMARK(BM_IntegrateChunk)->Arg(10)->Arg(40);

void BM_ConvexIntersection(benchmark::State & state)
{
  const FootprintSpec fp;
  const ConvexPolygon a = footprint_polygon(Pose2(0.3, 0.1, 0.2), fp);
  const ConvexPolygon b = oriented_rectangle(Pose2(1.0, 0.0, 0.0), 7.4, 2.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(convex_intersection_area(a, b));
  }
}
BENCHMARK(BM_ConvexIntersection);

void BM_CollisionLoss(benchmark::State & state)
{
  const EgoEsdf esdf = build_ego_esdf(FootprintSpec{}, 0.05);
  const Scenario sc = generate_scenario(3, Difficulty::kComplex);
  const auto pts = occupied_points(sc.grid);
  std::vector<Pose2> wps;
  for (int k = 0; k < 10; ++k) {
    wps.emplace_back(sc.ego_start.x() + 0.3 * k, sc.ego_start.y(), sc.ego_start.psi());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(collision_loss(wps, pts, esdf));
  }
  state.counters["points"] = static_cast<double>(pts.size());
}
BENCHMARK(BM_CollisionLoss);

void BM_ObstacleFieldPoseLoss(benchmark::State & state)
{
  const EgoEsdf esdf = build_ego_esdf(FootprintSpec{}, 0.05);
  const Scenario sc = generate_scenario(3, Difficulty::kComplex);
  const ObstacleField field(sc.grid, FootprintSpec{});
  const RawPose p = to_raw(sc.ego_start);
  for (auto _ : state) {
    RawPose g{0.0, 0.0, 0.0};
    benchmark::DoNotOptimize(field.pose_loss(p, esdf, g));
  }
}
BENCHMARK(BM_ObstacleFieldPoseLoss);

void BM_ExpertPlan(benchmark::State & state)
{
  const Scenario sc = generate_scenario(2, Difficulty::kNormal);
  const PathConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan_expert(sc, cfg));
  }
}
BENCHMARK(BM_ExpertPlan)->Unit(benchmark::kMillisecond);

// One closed-loop rollout: N_s decoder invocations over cached scene tokens.
void BM_Rollout(benchmark::State & state)
{
  const ModelParams params(bench_model(), 1);
  const Scenario sc = generate_scenario(5, Difficulty::kNormal);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout_autoregressive(params, sc));
  }
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

void BM_SampleLoss(benchmark::State & state)
{
  const ModelConfig mc = bench_model();
  ModelParams params(mc, 1);
  const Scenario sc = generate_scenario(5, Difficulty::kNormal);
  const TrainSample sample = make_sample({sc, plan_expert(sc, mc.path)}, mc);
  const EgoEsdf esdf = build_ego_esdf(mc.footprint, 0.05);
  const auto stage = static_cast<Stage>(state.range(0));
  for (auto _ : state) {
    params.zero_grad();
    benchmark::DoNotOptimize(sample_loss(params, sample, stage, LossWeights{}, esdf, 1.0));
  }
  state.SetLabel(to_string(stage));
}
BENCHMARK(BM_SampleLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MicroGradientCheck(benchmark::State & state)
{
  for (auto _ : state) {
    benchmark::DoNotOptimize(micro_gradient_check(0, Stage::kTeacherForcing));
  }
}
BENCHMARK(BM_MicroGradientCheck)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
