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

#include "segpark/losses.hpp"

#include <algorithm>
#include <cmath>

#include "segpark/errors.hpp"
#include "segpark/model.hpp"

namespace segpark
{
namespace
{

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

CurvatureChunk row_chunk(const Matrix & reg, Eigen::Index row, Gear gear, const PathConfig & cfg)
{
  const Eigen::RowVectorXd raw = reg.row(row);
  return decode_chunk({raw.data(), static_cast<std::size_t>(raw.size())}, gear, cfg);
}

// Pushes waypoint gradients of one decoded row back to its raw outputs and start pose.
void backprop_row(
  const Matrix & reg, Eigen::Index row, const CurvatureChunk & chunk, const RawPose & start,
  std::span<const RawPose> waypoint_grads, const PathConfig & cfg, Matrix & d_reg, RawPose & d_start)
{
  double ds_grad = 0.0;
  std::vector<double> k_grad(chunk.curvatures.size(), 0.0);
  integrate_raw_adjoint(start, chunk.delta_s, chunk.curvatures, sign(chunk.gear), waypoint_grads,
                        d_start, ds_grad, k_grad);
  const Eigen::RowVectorXd raw = reg.row(row);
  const auto jac = decode_chunk_jacobian({raw.data(), static_cast<std::size_t>(raw.size())}, cfg);
  d_reg(row, 0) += ds_grad * jac[0];
  for (std::size_t l = 0; l < k_grad.size(); ++l) {
    d_reg(row, static_cast<Eigen::Index>(l) + 1) += k_grad[l] * jac[l + 1];
  }
}

}  // namespace

GtTargets prepare_targets(
  const ParkingPath & expert, const Pose2 & ego_start, const AnchorGrid & grid, const PathConfig & cfg)
{
  const int n_valid = expert.n_valid();
  if (n_valid > cfg.n_segments) {
    throw ShapeError("prepare_targets: expert path has more segments than the decoder emits");
  }
  GtTargets out;
  const Gear first = n_valid > 0 ? expert.segments.front().gear : Gear::kForward;
  out.hypothesis = first == Gear::kForward ? 0 : 1;
  RawPose cur = to_raw(ego_start);
  for (int j = 0; j < cfg.n_segments; ++j) {
    GtStep st;
    st.start = from_raw(cur);
    if (j < n_valid) {
      const Segment & seg = expert.segments[static_cast<std::size_t>(j)];
      st.present = true;
      st.chunk = fit_chunk_from_waypoints(seg.waypoints, cfg);
      if (st.chunk.gear != seg.gear) {
        throw AmbiguousGear("prepare_targets: fitted gear disagrees with the segment gear");
      }
      std::vector<RawPose> wp(st.chunk.curvatures.size() + 1);
      integrate_raw(cur, st.chunk.delta_s, st.chunk.curvatures, sign(st.chunk.gear), wp);
      for (const auto & p : wp) {
        st.waypoints.push_back(from_raw(p));
      }
      cur = wp.back();
      st.anchor = match_anchor(st.chunk, grid);
    } else {
      const Gear g = j % 2 == 0 ? first : opposite(first);
      st.chunk.gear = g;
      st.anchor = padding_match(g, grid);
    }
    out.steps.push_back(std::move(st));
  }
  return out;
}

double smooth_l1(double x) noexcept
{
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

ImitationResult imitation_loss(
  const Matrix & reg, const Matrix & cls, const Matrix & val, std::span<const RawPose> starts,
  const GtTargets & gt, const ModelConfig & config, const LossWeights & weights)
{
  const int nq = config.queries.n_queries();
  const int np = config.path.n_pieces;
  const auto n_steps = static_cast<Eigen::Index>(gt.steps.size());
  const Eigen::Index rows = n_steps * 2 * nq;
  if (reg.rows() != rows || reg.cols() != np + 1 || cls.rows() != rows || cls.cols() != 1 ||
      val.rows() != rows || val.cols() != 1 || starts.size() != gt.steps.size()) {
    throw ShapeError("imitation_loss: head outputs do not match the targets");
  }
  const PathConfig & pc = config.path;
  ImitationResult out;
  out.d_reg = Matrix::Zero(reg.rows(), reg.cols());
  out.d_cls = Matrix::Zero(rows, 1);
  out.d_val = Matrix::Zero(rows, 1);
  out.d_start.assign(gt.steps.size(), RawPose{0.0, 0.0, 0.0});

  for (Eigen::Index j = 0; j < n_steps; ++j) {
    const GtStep & st = gt.steps[static_cast<std::size_t>(j)];
    const Eigen::Index base = j * 2 * nq + st.anchor.gear_slot * nq;

    double m = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < nq; ++q) {
      m = std::max(m, cls(base + q, 0));
    }
    double z = 0.0;
    for (int q = 0; q < nq; ++q) {
      z += std::exp(cls(base + q, 0) - m);
    }
    const double lse = m + std::log(z);
    out.classification += weights.lambda_p * (lse - cls(base + st.anchor.query_index, 0));
    for (int q = 0; q < nq; ++q) {
      const double p = std::exp(cls(base + q, 0) - lse);
      out.d_cls(base + q, 0) += weights.lambda_p * (p - (q == st.anchor.query_index ? 1.0 : 0.0));
    }

    const double target = st.present ? 1.0 : 0.0;
    for (int q = 0; q < nq; ++q) {
      const double v = val(base + q, 0);
      out.validity += weights.lambda_v * (softplus(v) - target * v) / nq;
      out.d_val(base + q, 0) += weights.lambda_v * (sigmoid(v) - target) / nq;
    }

    if (!st.present) {
      continue;
    }
    const Eigen::Index row = base + st.anchor.query_index;
    const double ds_range = pc.ds_max - pc.ds_min;
    const double k_range = 2.0 * pc.kappa_max;
    for (int i = 0; i <= np; ++i) {
      const double s = sigmoid(reg(row, i));
      const double want = i == 0 ? (st.chunk.delta_s - pc.ds_min) / ds_range
                                 : (st.chunk.curvatures[static_cast<std::size_t>(i) - 1] + pc.kappa_max) / k_range;
      const double diff = s - want;
      out.chunk += weights.lambda_c * smooth_l1(diff) / (np + 1);
      out.d_reg(row, i) += weights.lambda_c * smooth_l1_grad(diff) / (np + 1) * s * (1.0 - s);
    }

    const CurvatureChunk chunk = row_chunk(reg, row, gear_of_slot(st.anchor.gear_slot), pc);
    std::vector<RawPose> wp(static_cast<std::size_t>(np) + 1);
    const RawPose & start = starts[static_cast<std::size_t>(j)];
    integrate_raw(start, chunk.delta_s, chunk.curvatures, sign(chunk.gear), wp);
    std::vector<RawPose> wg(wp.size(), RawPose{0.0, 0.0, 0.0});
    for (int k = 1; k <= np; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const Pose2 & g = st.waypoints[ku];
      const double d[3] = {wp[ku][0] - g.x(), wp[ku][1] - g.y(), wrap_angle(wp[ku][2] - g.psi())};
      for (int c = 0; c < 3; ++c) {
        out.waypoint += weights.lambda_p * smooth_l1(d[c]) / np;
        wg[ku][static_cast<std::size_t>(c)] = weights.lambda_p * smooth_l1_grad(d[c]) / np;
      }
    }
    backprop_row(reg, row, chunk, start, wg, pc, out.d_reg, out.d_start[static_cast<std::size_t>(j)]);
  }
  out.total = out.waypoint + out.chunk + out.classification + out.validity;
  return out;
}

EndpointLoss endpoint_loss(const RawPose & final_pose, const Pose2 & slot_pose, double lambda_psi) noexcept
{
  const double c = std::cos(slot_pose.psi());
  const double s = std::sin(slot_pose.psi());
  const double dx = final_pose[0] - slot_pose.x();
  const double dy = final_pose[1] - slot_pose.y();
  const double xt = c * dx + s * dy;
  const double yt = -s * dx + c * dy;
  const double pt = wrap_angle(final_pose[2] - slot_pose.psi());
  EndpointLoss out;
  out.loss = xt * xt + yt * yt + lambda_psi * pt * pt;
  out.grad = {2.0 * (c * xt - s * yt), 2.0 * (s * xt + c * yt), 2.0 * lambda_psi * pt};
  return out;
}

EndpointLoss endpoint_loss(const Pose2 & final_pose, const Pose2 & slot_pose, double lambda_psi) noexcept
{
  return endpoint_loss(to_raw(final_pose), slot_pose, lambda_psi);
}

OutcomeResult outcome_loss(
  const Matrix & reg, std::span<const OutcomeStep> steps, const Pose2 & slot_pose,
  const ObstacleField & field, const EgoEsdf & esdf, const ModelConfig & config,
  const LossWeights & weights)
{
  const int nq = config.queries.n_queries();
  const int np = config.path.n_pieces;
  if (reg.rows() != static_cast<Eigen::Index>(steps.size()) * 2 * nq || reg.cols() != np + 1) {
    throw ShapeError("outcome_loss: regression outputs do not match the rollout");
  }
  OutcomeResult out;
  out.d_reg = Matrix::Zero(reg.rows(), reg.cols());
  out.d_start.assign(steps.size(), {RawPose{0.0, 0.0, 0.0}, RawPose{0.0, 0.0, 0.0}});
  std::vector<RawPose> wp(static_cast<std::size_t>(np) + 1);
  std::vector<RawPose> wg(wp.size());

  for (std::size_t j = 0; j < steps.size(); ++j) {
    for (int s = 0; s < 2; ++s) {
      const auto su = static_cast<std::size_t>(s);
      if (!steps[j].active[su]) {
        continue;
      }
      const RawPose & start = steps[j].start[su];
      for (int q = 0; q + 1 < nq; ++q) {
        const auto row = static_cast<Eigen::Index>(j) * 2 * nq + s * nq + q;
        const CurvatureChunk chunk = row_chunk(reg, row, gear_of_slot(s), config.path);
        integrate_raw(start, chunk.delta_s, chunk.curvatures, sign(chunk.gear), wp);
        std::fill(wg.begin(), wg.end(), RawPose{0.0, 0.0, 0.0});
        bool touched = false;
        for (int k = 1; k <= np; ++k) {
          const auto ku = static_cast<std::size_t>(k);
          const double l = field.pose_loss(wp[ku], esdf, wg[ku]);
          out.collision += l;
          touched = touched || l > 0.0;
        }
        if (steps[j].terminal[su]) {
          const EndpointLoss e = endpoint_loss(wp.back(), slot_pose, weights.lambda_psi);
          out.endpoint += e.loss;
          for (int c = 0; c < 3; ++c) {
            wg.back()[static_cast<std::size_t>(c)] += e.grad[static_cast<std::size_t>(c)];
          }
          touched = true;
        }
        if (touched) {
          backprop_row(reg, row, chunk, start, wg, config.path, out.d_reg, out.d_start[j][su]);
        }
      }
    }
  }
  out.total = out.endpoint + out.collision;
  return out;
}

}  // namespace segpark
