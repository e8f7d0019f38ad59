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

// Shared generators and fixtures for the unit and acceptance tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "segpark/config.hpp"
#include "segpark/micro.hpp"
#include "segpark/geometry.hpp"
#include "segpark/model.hpp"
#include "segpark/occupancy.hpp"
#include "segpark/path_model.hpp"
#include "segpark/scenario.hpp"

namespace segpark::testing
{

/// Seeded value generator for property tests.
class Gen
{
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  Pose2 pose(double extent = 10.0)
  {
    const double x = uniform(-extent, extent);
    const double y = uniform(-extent, extent);
    return {x, y, uniform(-std::numbers::pi, std::numbers::pi)};
  }

  /// Random convex polygon: sorted angles on a jittered circle.
  ConvexPolygon convex(double extent = 3.0)
  {
    for (;;) {
      const int n = integer(3, 8);
      const Vec2 c{uniform(-extent, extent), uniform(-extent, extent)};
      const double r = uniform(0.3, 2.0);
      std::vector<double> angles;
      for (int i = 0; i < n; ++i) {
        angles.push_back(uniform(0.0, 2.0 * std::numbers::pi));
      }
      std::sort(angles.begin(), angles.end());
      std::vector<Vec2> v;
      for (double a : angles) {
        v.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
      }
      try {
        return ConvexPolygon(v);
      } catch (const std::invalid_argument &) {
      }
    }
  }

  CurvatureChunk chunk(const PathConfig & cfg, Gear gear)
  {
    CurvatureChunk c;
    c.gear = gear;
    c.delta_s = uniform(cfg.ds_min, cfg.ds_max);
    for (int l = 0; l < cfg.n_pieces; ++l) {
      c.curvatures.push_back(uniform(-cfg.kappa_max, cfg.kappa_max));
    }
    return c;
  }

  std::mt19937_64 & engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

inline ModelConfig micro_config() { return micro_model_config(); }
using segpark::micro_grid_spec;
using segpark::micro_record;

/// Fraction of the body at `pose` inside the slot rectangle, by point sampling on a lattice of
/// the given spacing in the body frame.
inline double sampled_coverage(const Pose2 & pose, const FootprintSpec & fp, const SlotSpec & slot, double spacing)
{
  const int nx = static_cast<int>(std::lround(fp.length() / spacing));
  const int ny = static_cast<int>(std::lround(2.0 * fp.half_width / spacing));
  long long inside = 0;
  for (int i = 0; i < nx; ++i) {
    const double lx = -fp.rear_overhang + (i + 0.5) * fp.length() / nx;
    for (int j = 0; j < ny; ++j) {
      const double ly = -fp.half_width + (j + 0.5) * 2.0 * fp.half_width / ny;
      const Vec2 s = point_in_frame(transform_point(pose, {lx, ly}), slot.pose);
      if (std::abs(s.x) <= 0.5 * slot.depth && std::abs(s.y) <= 0.5 * slot.width) {
        ++inside;
      }
    }
  }
  return static_cast<double>(inside) / (static_cast<double>(nx) * ny);
}

/// Saturate validity and flatten the classifier so rollouts run every step on query 0.
inline void force_full_rollout(ModelParams & params)
{
  params.at(params.val_b).value.setConstant(10.0);
  params.at(params.cls_w2).value.setZero();
}

/// Reference decoder that emits one token per invocation: the step length, then one curvature per
/// piece, re-running the decoder from the partially integrated pose each time.
struct TokenRollout
{
  std::vector<RawPose> poses;
  int decoder_invocations{0};
};

inline TokenRollout token_level_rollout(const ModelParams & params, const Scenario & scenario)
{
  const ModelConfig & mc = params.config();
  const int nq = mc.queries.n_queries();
  ad::Tape tape;
  const BoundParams bound = bind_params(tape, params);
  const SceneCache cache = encode_on_tape(tape, bound, params, scene_patches(scenario, mc));
  TokenRollout out;
  RawPose pose = to_raw(scenario.ego_start);
  out.poses.push_back(pose);
  for (int j = 0; j < mc.path.n_segments; ++j) {
    const int slot = j % 2;
    double delta_s = 0.0;
    for (int k = 0; k <= mc.path.n_pieces; ++k) {
      Matrix row(1, 3);
      row << pose[0], pose[1], pose[2];
      const ad::Var v = tape.constant(row);
      const std::vector<ad::Var> gsp{v, v};
      const DecoderOutputs dec = decode_on_tape(tape, bound, params, cache, gsp, scenario.slot.pose);
      ++out.decoder_invocations;
      const Matrix & reg = tape.value(dec.reg);
      const Matrix & cls = tape.value(dec.cls);
      Eigen::Index best = 0;
      cls.middleRows(slot * nq, nq - 1).col(0).maxCoeff(&best);
      const auto r = slot * nq + best;
      std::vector<double> raw(reg.row(r).data(), reg.row(r).data() + reg.cols());
      const CurvatureChunk c = decode_chunk(raw, gear_of_slot(slot), mc.path);
      if (k == 0) {
        delta_s = c.delta_s;
        continue;
      }
      pose = rk2_step(pose, delta_s, c.curvatures[static_cast<std::size_t>(k - 1)], sign(c.gear));
      out.poses.push_back(pose);
    }
  }
  return out;
}

}  // namespace segpark::testing
