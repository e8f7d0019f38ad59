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

#include "segpark/micro.hpp"

#include <random>

#include "segpark/esdf.hpp"

namespace segpark
{

ModelConfig micro_model_config()
{
  ModelConfig c;
  c.queries = QueryConfig{2, 2, 3, 8};
  c.path = PathConfig{3, 4, 0.2, 0.1, 1.0};
  c.n_layers = 2;
  c.n_heads = 2;
  c.patch = 4;
  c.ff_mult = 2;
  c.heatmap_sigma = 0.5;
  return c;
}

GridSpec micro_grid_spec() { return GridSpec{8, 8, 1.0, Pose2(-2.0, -4.0, 0.0)}; }

DatasetRecord micro_record(std::uint64_t seed, bool with_obstacles)
{
  std::mt19937_64 rng(seed);
  const auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const PathConfig cfg = micro_model_config().path;
  DatasetRecord rec;
  rec.scenario.id = seed;
  rec.scenario.grid = OccupancyGrid(micro_grid_spec());
  rec.scenario.ego_start = Pose2(0.0, 0.0, 0.0);
  Pose2 cur = rec.scenario.ego_start;
  Gear g = Gear::kForward;
  for (int s = 0; s < 2; ++s) {
    CurvatureChunk c;
    c.gear = g;
    c.delta_s = uniform(cfg.ds_min, cfg.ds_max);
    for (int l = 0; l < cfg.n_pieces; ++l) {
      c.curvatures.push_back(uniform(-cfg.kappa_max, cfg.kappa_max));
    }
    c.delta_s = uniform(0.3, 0.8);
    Segment seg = integrate_chunk(cur, c);
    cur = seg.end();
    rec.expert_path.segments.push_back(seg);
    g = opposite(g);
  }
  Segment pad = rec.expert_path.segments.back();
  pad.valid = false;
  pad.gear = g;
  rec.expert_path.segments.push_back(pad);
  rec.scenario.slot = SlotSpec{cur, 2.5, 5.5};
  if (with_obstacles) {
    std::vector<std::uint8_t> cells(64, 0);
    for (int k = 0; k < 3; ++k) {
      cells[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 63)(rng))] = 1;
    }
    rec.scenario.grid = OccupancyGrid(micro_grid_spec(), cells);
  }
  return rec;
}

GradCheckReport micro_gradient_check(std::uint64_t seed, Stage stage, double tolerance, double h)
{
  const ModelConfig mc = micro_model_config();
  ModelParams params(mc, seed);
  const TrainSample sample = make_sample(micro_record(seed, true), mc);
  const EgoEsdf esdf = build_ego_esdf(mc.footprint, 0.05);
  const LossWeights w;

  params.zero_grad();
  (void)sample_loss(params, sample, stage, w, esdf, 1.0);
  const std::vector<double> analytic = flatten_grads(params);
  const std::vector<double> theta = flatten_values(params);

  ModelParams probe = params;
  const auto loss = [&](std::span<const double> t) {
    assign_values(probe, t);
    return sample_loss(probe, sample, stage, w, esdf, 0.0).loss.total;
  };
  return gradient_check(loss, theta, analytic, h, tolerance,
                        [&](std::size_t i) { return entry_name(params, i); });
}

}  // namespace segpark
