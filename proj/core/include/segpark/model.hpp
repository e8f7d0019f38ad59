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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segpark/autodiff.hpp"
#include "segpark/config.hpp"
#include "segpark/occupancy.hpp"
#include "segpark/scenario.hpp"

namespace segpark
{

struct Tensor
{
  std::string name;
  Matrix value;
  Matrix grad;
  /// Weight matrices get decoupled weight decay; biases, norms and query embeddings do not.
  bool decay{false};
};

/// All learnable tensors of the scene encoder, decoder and heads, in declaration order.
/// Key projections and the score output carry no bias: softmax is invariant to them.
class ModelParams
{
public:
  struct Layer
  {
    int ln1_g, ln1_b, sa_wq, sa_bq, sa_wk, sa_wv, sa_bv, sa_wo, sa_bo;
    int ln2_g, ln2_b, ca_wq, ca_bq, ca_wk, ca_wv, ca_bv, ca_wo, ca_bo;
    int ln3_g, ln3_b, ff_w1, ff_b1, ff_w2, ff_b2;
  };

  ModelParams() = default;
  /// Deterministic initialization from a seed.
  ModelParams(const ModelConfig & config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig & config() const noexcept { return config_; }
  [[nodiscard]] std::vector<Tensor> & tensors() noexcept { return tensors_; }
  [[nodiscard]] const std::vector<Tensor> & tensors() const noexcept { return tensors_; }
  [[nodiscard]] Tensor & at(int index) { return tensors_[static_cast<std::size_t>(index)]; }
  [[nodiscard]] const Tensor & at(int index) const { return tensors_[static_cast<std::size_t>(index)]; }
  [[nodiscard]] std::size_t count() const noexcept;
  void zero_grad();
  [[nodiscard]] bool all_finite() const noexcept;

  int patch_w{-1}, patch_b{-1};
  std::vector<Layer> layers;
  int final_g{-1}, final_b{-1};
  int q_lon{-1}, q_lat{-1}, q_gear{-1}, q_pad{-1};
  int reg_w1{-1}, reg_b1{-1}, reg_w2{-1}, reg_b2{-1};
  int cls_w1{-1}, cls_b1{-1}, cls_w2{-1};
  int val_w{-1}, val_b{-1};

private:
  int add(std::string name, Matrix value, bool decay);

  ModelConfig config_{};
  std::vector<Tensor> tensors_;
};

/// Parameter-independent scene input: sparse 2-channel patches and fixed 2D positional codes.
struct ScenePatches
{
  ad::SparseRows patches;
  Matrix position_code;
  int tokens_x{0};
  int tokens_y{0};
};

/// Split occupancy and slot heatmap into non-overlapping patches. Throws ShapeError on mismatch.
[[nodiscard]] ScenePatches patchify(
  const OccupancyGrid & grid, std::span<const float> heatmap, int patch, int dim);

/// Patches of a scenario with its slot heatmap channel.
[[nodiscard]] ScenePatches scene_patches(const Scenario & scenario, const ModelConfig & config);

/// Scene token embeddings (tokens x D).
struct SceneTokens
{
  Matrix tokens;
  int tokens_x{0};
  int tokens_y{0};
};

[[nodiscard]] SceneTokens encode_scene(
  const ModelParams & params, const OccupancyGrid & grid, std::span<const float> heatmap);

/// Sinusoidal code of a slot-relative pose: (x, y, 4 cos psi, 4 sin psi), D/8 bands each.
[[nodiscard]] Eigen::RowVectorXd position_embed(const Pose2 & gsp_in_slot_frame, int dim);

/// Decoded per-step prediction. Index [gear slot][query].
struct SegmentPrediction
{
  std::array<std::vector<CurvatureChunk>, 2> chunks;
  std::array<std::vector<double>, 2> scores;
  std::array<std::vector<double>, 2> validity;
};

/// Chunk from one regression row (N_p + 1 raw values) through sigmoid and affine renormalization.
[[nodiscard]] CurvatureChunk decode_chunk(
  std::span<const double> raw, Gear gear, const PathConfig & cfg);
/// d(delta_s)/d(raw_0) followed by d(kappa_l)/d(raw_l).
[[nodiscard]] std::vector<double> decode_chunk_jacobian(
  std::span<const double> raw, const PathConfig & cfg);

/// Tape bindings of every parameter tensor.
struct BoundParams
{
  std::vector<ad::Var> vars;
  [[nodiscard]] ad::Var operator[](int index) const { return vars[static_cast<std::size_t>(index)]; }
};

/// `with_grad` binds gradient buffers so backward() accumulates into Tensor::grad.
[[nodiscard]] BoundParams bind_params(ad::Tape & tape, ModelParams & params, bool with_grad);
[[nodiscard]] BoundParams bind_params(ad::Tape & tape, const ModelParams & params);

/// Scene tokens and their per-layer cross-attention keys and values.
struct SceneCache
{
  ad::Var tokens;
  std::vector<ad::Var> keys;
  std::vector<ad::Var> values;
  int n_tokens{0};
};

[[nodiscard]] SceneCache encode_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const ScenePatches & scene);

/// Raw head outputs for S steps; row = step * (2 N_q) + gear_slot * N_q + query.
struct DecoderOutputs
{
  ad::Var reg;
  ad::Var cls;
  ad::Var val;
  int n_steps{0};
};

/// One decoder invocation over S steps at once. `gsp` holds 2 S start poses (1 x 3 raw world
/// poses), ordered step-major then gear slot.
[[nodiscard]] DecoderOutputs decode_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const SceneCache & scene,
  std::span<const ad::Var> gsp, const Pose2 & slot_pose);

/// Differentiable end pose (1 x 3) of the chunk in `reg` row `row` integrated from `start`.
[[nodiscard]] ad::Var integrate_endpoint(
  ad::Tape & tape, ad::Var start, ad::Var reg, int row, Gear gear, const PathConfig & cfg);

/// Decode one step of head outputs into chunks, per-gear softmax scores and validity.
[[nodiscard]] SegmentPrediction decode_prediction(
  const Matrix & reg, const Matrix & cls, const Matrix & val, int step, const ModelConfig & config);

/// Single decoder pass for one step from both per-gear GSP states (slot frame).
[[nodiscard]] SegmentPrediction forward_segment(
  const ModelParams & params, const SceneTokens & scene, const std::array<Pose2, 2> & gsp_in_slot);

enum class SelectMode : std::uint8_t { kArgmax = 0, kSample = 1 };

struct RolloutConfig
{
  SelectMode mode{SelectMode::kArgmax};
  std::uint64_t seed{0};
};

/// Where a GSP value came from.
enum class GspSource : std::uint8_t { kEgoStart = 0, kGroundTruth = 1, kOnPolicy = 2 };

/// Per-step bookkeeping of an on-tape rollout. Hypothesis h uses gear slot (h + step) % 2;
/// h = 0 starts forward, h = 1 starts backward.
struct RolloutStep
{
  std::array<ad::Var, 2> gsp;                // per gear slot
  std::array<GspSource, 2> source{};         // per gear slot
  std::array<int, 2> selected{};             // per gear slot
  std::array<bool, 2> active{};              // per gear slot: owning hypothesis still running
  std::array<bool, 2> valid{};               // per gear slot: produced a valid segment
  DecoderOutputs outputs;
};

struct RolloutTrace
{
  std::vector<RolloutStep> steps;
  /// Index 0 is the backward-starting path, index 1 the forward-starting one.
  std::array<ParkingPath, 2> paths;
  /// Step of each hypothesis' last valid segment, -1 when it produced none.
  std::array<int, 2> terminal_step{-1, -1};
  int decoder_invocations{0};
};

[[nodiscard]] RolloutTrace rollout_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const SceneCache & scene,
  const Pose2 & ego_start, const Pose2 & slot_pose, const RolloutConfig & cfg);

/// Closed-loop rollout of a scenario; returns {backward-starting, forward-starting} paths.
[[nodiscard]] RolloutTrace rollout_autoregressive(
  const ModelParams & params, const Scenario & scenario, const RolloutConfig & cfg = {});

/// Hypothesis owning gear slot `slot` at `step`.
[[nodiscard]] constexpr int hypothesis_of_slot(int slot, int step) noexcept { return (slot + step) % 2; }
[[nodiscard]] constexpr int slot_of_hypothesis(int hyp, int step) noexcept { return (hyp + step) % 2; }

}  // namespace segpark
