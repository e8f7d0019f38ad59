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

// Tiny model and scene used by gradient checks and smoke tests.

#pragma once

#include <cstdint>

#include "segpark/config.hpp"
#include "segpark/scenario.hpp"
#include "segpark/training.hpp"

namespace segpark
{

/// Width 8, two layers, four scene tokens, four pieces per segment.
[[nodiscard]] ModelConfig micro_model_config();

/// 8 x 8 grid at 1 m covering [-2, 6] x [-4, 4].
[[nodiscard]] GridSpec micro_grid_spec();

/// Two ground-truth segments (forward then backward) from the origin plus one padding step; the
/// slot sits at the end of the path. Three random occupied cells when `with_obstacles`.
[[nodiscard]] DatasetRecord micro_record(std::uint64_t seed, bool with_obstacles);

/// Central-difference check of every micro-model parameter gradient of one stage's loss, on
/// micro_record(seed, true) with default loss weights and step `h`.
[[nodiscard]] GradCheckReport micro_gradient_check(
  std::uint64_t seed, Stage stage, double tolerance = 1e-4, double h = 1e-5);

}  // namespace segpark
