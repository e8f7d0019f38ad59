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
#include <string>

#include "json.hpp"
#include "segpark/anchors.hpp"
#include "segpark/geometry.hpp"
#include "segpark/path_model.hpp"

namespace segpark
{

struct ModelConfig
{
  QueryConfig queries{};
  PathConfig path{};
  int n_layers{4};
  int n_heads{4};
  /// Patch edge in grid cells; tokens = (width / patch) * (height / patch).
  int patch{16};
  int ff_mult{4};
  double heatmap_sigma{0.5};
  FootprintSpec footprint{};

  [[nodiscard]] bool valid() const noexcept;
};

struct LossWeights
{
  double lambda_p{1.0};
  double lambda_c{1.0};
  double lambda_v{0.5};
  double lambda_i{1.0};
  double lambda_o{0.1};
  double lambda_psi{1.0};

  [[nodiscard]] bool valid() const noexcept;
};

enum class Stage : std::uint8_t { kTeacherForcing = 0, kArgmaxFinetune = 1 };

[[nodiscard]] std::string to_string(Stage s);
/// Accepts "teach"/"teacher_forcing" and "argmax"/"argmax_finetune".
[[nodiscard]] Stage stage_from_string(const std::string & name);

struct OptimizerConfig
{
  double learning_rate{3e-4};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  double weight_decay{1e-4};
  /// Global gradient-norm clip; 0 disables.
  double grad_clip{0.0};
  /// Cosine decay of the learning rate to zero over the run.
  bool cosine_decay{false};
};

struct TrainConfig
{
  Stage stage{Stage::kTeacherForcing};
  int steps{2000};
  int batch_size{4};
  std::uint64_t seed{0};
  LossWeights weights{};
  OptimizerConfig optimizer{};
  /// Node spacing of the ego-centric distance field used by the collision term.
  double esdf_resolution{0.05};

  [[nodiscard]] bool valid() const noexcept;
};

void to_json(nlohmann::json & j, const ModelConfig & c);
void from_json(const nlohmann::json & j, ModelConfig & c);
void to_json(nlohmann::json & j, const LossWeights & c);
void from_json(const nlohmann::json & j, LossWeights & c);
void to_json(nlohmann::json & j, const TrainConfig & c);
void from_json(const nlohmann::json & j, TrainConfig & c);

}  // namespace segpark
