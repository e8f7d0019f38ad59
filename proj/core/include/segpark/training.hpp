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

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "segpark/config.hpp"
#include "segpark/esdf.hpp"
#include "segpark/losses.hpp"
#include "segpark/model.hpp"
#include "segpark/scenario.hpp"

namespace segpark
{

/// A dataset record prepared once for repeated loss evaluation.
struct TrainSample
{
  std::uint64_t id{0};
  Pose2 ego_start;
  Pose2 slot_pose;
  ScenePatches patches;
  GtTargets targets;
  std::shared_ptr<const ObstacleField> field;
};

[[nodiscard]] TrainSample make_sample(const DatasetRecord & record, const ModelConfig & config);
[[nodiscard]] std::vector<TrainSample> make_samples(
  std::span<const DatasetRecord> records, const ModelConfig & config);

/// Weighted loss terms; `total` is their sum.
struct LossBreakdown
{
  double waypoint{0.0};
  double chunk{0.0};
  double classification{0.0};
  double validity{0.0};
  double endpoint{0.0};
  double collision{0.0};
  double total{0.0};

  LossBreakdown & operator+=(const LossBreakdown & o);
  LossBreakdown & operator*=(double s);
};

struct SampleLoss
{
  LossBreakdown loss;
  /// Origin of every start pose fed to the decoder, per step and gear slot.
  std::vector<GspSource> gsp_sources;
};

/// Loss of one sample under a stage. When `grad_scale` is non-zero, gradients times `grad_scale`
/// are accumulated into the parameter gradient buffers.
/// Stage 1 feeds ground-truth start poses; stage 2 rolls out argmax and adds the outcome loss.
[[nodiscard]] SampleLoss sample_loss(
  ModelParams & params, const TrainSample & sample, Stage stage, const LossWeights & weights,
  const EgoEsdf & esdf, double grad_scale);

/// Decoupled-weight-decay Adam.
class AdamW
{
public:
  AdamW(const ModelParams & params, const OptimizerConfig & cfg);
  void step(ModelParams & params, double learning_rate);
  [[nodiscard]] int steps_taken() const noexcept { return t_; }

private:
  OptimizerConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  int t_{0};
};

struct StepMetrics
{
  int step{0};
  Stage stage{Stage::kTeacherForcing};
  LossBreakdown loss;
  double grad_norm{0.0};
  double learning_rate{0.0};
};

[[nodiscard]] nlohmann::json to_json(const StepMetrics & m);

struct TrainResult
{
  std::vector<StepMetrics> log;
  /// Stage 2 ran without the imitation term.
  bool imitation_disabled{false};
};

/// Runs cfg.steps optimizer steps over minibatches drawn from a seeded per-epoch shuffle.
/// Throws NonFiniteLoss naming the batch when a loss or gradient stops being finite.
TrainResult train_stage(
  ModelParams & params, std::span<const TrainSample> data, const TrainConfig & cfg,
  const std::function<void(const StepMetrics &)> & on_step = {});

struct GradCheckReport
{
  double max_rel_err{0.0};
  std::size_t worst_index{0};
  std::string worst_parameter;
  double worst_analytic{0.0};
  double worst_numeric{0.0};
  std::size_t n_checked{0};
  bool passed{false};
};

/// Central-difference check of `analytic` against `loss` around `theta`; relative error is
/// |a - n| / max(|a|, |n|, 1e-8). `name` labels coordinates in the report.
[[nodiscard]] GradCheckReport gradient_check(
  const std::function<double(std::span<const double>)> & loss, std::span<const double> theta,
  std::span<const double> analytic, double h, double tolerance,
  const std::function<std::string(std::size_t)> & name = {});

/// Flat views of a model's parameters, in declaration order.
[[nodiscard]] std::vector<double> flatten_values(const ModelParams & params);
[[nodiscard]] std::vector<double> flatten_grads(const ModelParams & params);
void assign_values(ModelParams & params, std::span<const double> flat);
/// "tensor[row,col]" label of a flat index.
[[nodiscard]] std::string entry_name(const ModelParams & params, std::size_t index);

}  // namespace segpark
