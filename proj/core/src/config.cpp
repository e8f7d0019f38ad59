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

#include "segpark/config.hpp"

#include <stdexcept>

namespace segpark
{

bool ModelConfig::valid() const noexcept
{
  return queries.valid() && path.valid() && n_layers >= 1 && n_heads >= 1 &&
         queries.dim % n_heads == 0 && queries.dim % 8 == 0 && patch >= 1 && ff_mult >= 1 &&
         heatmap_sigma > 0.0 && footprint.valid();
}

bool LossWeights::valid() const noexcept
{
  return lambda_p >= 0.0 && lambda_c >= 0.0 && lambda_v >= 0.0 && lambda_i >= 0.0 &&
         lambda_o >= 0.0 && lambda_psi >= 0.0;
}

bool TrainConfig::valid() const noexcept
{
  return steps > 0 && batch_size > 0 && weights.valid() && optimizer.learning_rate > 0.0 &&
         optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
         optimizer.beta2 < 1.0 && optimizer.epsilon > 0.0 && optimizer.weight_decay >= 0.0 &&
         optimizer.grad_clip >= 0.0 && esdf_resolution > 0.0;
}

std::string to_string(Stage s)
{
  return s == Stage::kTeacherForcing ? "teach" : "argmax";
}

Stage stage_from_string(const std::string & name)
{
  if (name == "teach" || name == "teacher_forcing") {
    return Stage::kTeacherForcing;
  }
  if (name == "argmax" || name == "argmax_finetune") {
    return Stage::kArgmaxFinetune;
  }
  throw std::invalid_argument("unknown stage: " + name);
}

void to_json(nlohmann::json & j, const ModelConfig & c)
{
  j = nlohmann::json{
    {"n_gear", c.queries.n_gear},
    {"n_lon", c.queries.n_lon},
    {"n_lat", c.queries.n_lat},
    {"dim", c.queries.dim},
    {"n_segments", c.path.n_segments},
    {"n_pieces", c.path.n_pieces},
    {"kappa_max", c.path.kappa_max},
    {"ds_min", c.path.ds_min},
    {"ds_max", c.path.ds_max},
    {"n_layers", c.n_layers},
    {"n_heads", c.n_heads},
    {"patch", c.patch},
    {"ff_mult", c.ff_mult},
    {"heatmap_sigma", c.heatmap_sigma},
    {"front_overhang", c.footprint.front_overhang},
    {"rear_overhang", c.footprint.rear_overhang},
    {"half_width", c.footprint.half_width},
  };
}

void from_json(const nlohmann::json & j, ModelConfig & c)
{
  c.queries.n_gear = j.value("n_gear", c.queries.n_gear);
  c.queries.n_lon = j.value("n_lon", c.queries.n_lon);
  c.queries.n_lat = j.value("n_lat", c.queries.n_lat);
  c.queries.dim = j.value("dim", c.queries.dim);
  c.path.n_segments = j.value("n_segments", c.path.n_segments);
  c.path.n_pieces = j.value("n_pieces", c.path.n_pieces);
  c.path.kappa_max = j.value("kappa_max", c.path.kappa_max);
  c.path.ds_min = j.value("ds_min", c.path.ds_min);
  c.path.ds_max = j.value("ds_max", c.path.ds_max);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.patch = j.value("patch", c.patch);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.heatmap_sigma = j.value("heatmap_sigma", c.heatmap_sigma);
  c.footprint.front_overhang = j.value("front_overhang", c.footprint.front_overhang);
  c.footprint.rear_overhang = j.value("rear_overhang", c.footprint.rear_overhang);
  c.footprint.half_width = j.value("half_width", c.footprint.half_width);
}

void to_json(nlohmann::json & j, const LossWeights & c)
{
  j = nlohmann::json{{"lambda_p", c.lambda_p}, {"lambda_c", c.lambda_c}, {"lambda_v", c.lambda_v},
                     {"lambda_i", c.lambda_i}, {"lambda_o", c.lambda_o}, {"lambda_psi", c.lambda_psi}};
}

void from_json(const nlohmann::json & j, LossWeights & c)
{
  c.lambda_p = j.value("lambda_p", c.lambda_p);
  c.lambda_c = j.value("lambda_c", c.lambda_c);
  c.lambda_v = j.value("lambda_v", c.lambda_v);
  c.lambda_i = j.value("lambda_i", c.lambda_i);
  c.lambda_o = j.value("lambda_o", c.lambda_o);
  c.lambda_psi = j.value("lambda_psi", c.lambda_psi);
}

void to_json(nlohmann::json & j, const TrainConfig & c)
{
  j = nlohmann::json{
    {"stage", to_string(c.stage)},
    {"steps", c.steps},
    {"batch_size", c.batch_size},
    {"seed", c.seed},
    {"weights", c.weights},
    {"learning_rate", c.optimizer.learning_rate},
    {"beta1", c.optimizer.beta1},
    {"beta2", c.optimizer.beta2},
    {"epsilon", c.optimizer.epsilon},
    {"weight_decay", c.optimizer.weight_decay},
    {"grad_clip", c.optimizer.grad_clip},
    {"cosine_decay", c.optimizer.cosine_decay},
    {"esdf_resolution", c.esdf_resolution},
  };
}

void from_json(const nlohmann::json & j, TrainConfig & c)
{
  if (j.contains("stage")) {
    c.stage = stage_from_string(j.at("stage").get<std::string>());
  }
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("weights")) {
    c.weights = j.at("weights").get<LossWeights>();
  }
  c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
  c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
  c.optimizer.epsilon = j.value("epsilon", c.optimizer.epsilon);
  c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
  c.optimizer.grad_clip = j.value("grad_clip", c.optimizer.grad_clip);
  c.optimizer.cosine_decay = j.value("cosine_decay", c.optimizer.cosine_decay);
  c.esdf_resolution = j.value("esdf_resolution", c.esdf_resolution);
}

}  // namespace segpark
