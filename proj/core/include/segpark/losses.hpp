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

#include <array>
#include <span>
#include <vector>

#include "segpark/anchors.hpp"
#include "segpark/config.hpp"
#include "segpark/esdf.hpp"
#include "segpark/path_model.hpp"

namespace segpark
{

/// Supervision for one decoder step.
struct GtStep
{
  bool present{false};
  /// Gear slot and matched query; the padding query when the step has no segment.
  AnchorMatch anchor;
  CurvatureChunk chunk;
  /// N_p + 1 poses integrated from `start` (present steps only).
  std::vector<Pose2> waypoints;
  /// Ground-truth gear shift point feeding this step.
  Pose2 start;
};

struct GtTargets
{
  std::vector<GtStep> steps;  // exactly N_s entries
  /// Rollout hypothesis that follows the ground truth: 0 starts forward, 1 starts backward.
  int hypothesis{0};
};

/// Fit every expert segment into the chunk space and match it to an anchor. Segments are chained
/// from `ego_start` so targets are continuous. Throws ShapeError when the path is longer than N_s.
[[nodiscard]] GtTargets prepare_targets(
  const ParkingPath & expert, const Pose2 & ego_start, const AnchorGrid & grid, const PathConfig & cfg);

[[nodiscard]] double smooth_l1(double x) noexcept;
[[nodiscard]] double smooth_l1_grad(double x) noexcept;

/// Every term already carries its weight; `total` is their sum.
struct ImitationResult
{
  double waypoint{0.0};
  double chunk{0.0};
  double classification{0.0};
  double validity{0.0};
  double total{0.0};
  Matrix d_reg;
  Matrix d_cls;
  Matrix d_val;
  /// d total / d start pose of each step's winner integration.
  std::vector<RawPose> d_start;
};

/// Winner-takes-all imitation loss summed over steps. Head rows follow the decoder layout
/// step * (2 N_q) + gear_slot * N_q + query; `starts[j]` is the pose the step-j winner is
/// integrated from.
[[nodiscard]] ImitationResult imitation_loss(
  const Matrix & reg, const Matrix & cls, const Matrix & val, std::span<const RawPose> starts,
  const GtTargets & gt, const ModelConfig & config, const LossWeights & weights);

struct EndpointLoss
{
  double loss{0.0};
  RawPose grad{0.0, 0.0, 0.0};
};

/// Squared slot-frame position error plus weighted squared wrapped heading error.
[[nodiscard]] EndpointLoss endpoint_loss(const RawPose & final_pose, const Pose2 & slot_pose, double lambda_psi) noexcept;
[[nodiscard]] EndpointLoss endpoint_loss(const Pose2 & final_pose, const Pose2 & slot_pose, double lambda_psi) noexcept;

/// Rollout state of one decoder step as seen by the outcome loss, per gear slot.
struct OutcomeStep
{
  std::array<RawPose, 2> start{};
  /// The owning hypothesis was still running when the step began.
  std::array<bool, 2> active{};
  /// The owning hypothesis ends with this step; its queries also pay the endpoint term.
  std::array<bool, 2> terminal{};
};

struct OutcomeResult
{
  double endpoint{0.0};
  double collision{0.0};
  double total{0.0};
  Matrix d_reg;
  std::vector<std::array<RawPose, 2>> d_start;
};

/// Endpoint and collision penalties over every non-padding query of every active step.
[[nodiscard]] OutcomeResult outcome_loss(
  const Matrix & reg, std::span<const OutcomeStep> steps, const Pose2 & slot_pose,
  const ObstacleField & field, const EgoEsdf & esdf, const ModelConfig & config,
  const LossWeights & weights);

}  // namespace segpark
