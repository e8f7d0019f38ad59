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

#include <filesystem>
#include <string>

#include "json.hpp"
#include "segpark/config.hpp"
#include "segpark/model.hpp"

namespace segpark
{

struct CheckpointInfo
{
  /// Optimizer steps applied over the parameters' whole history.
  int step{0};
  /// Set once a teacher-forcing run has finished; argmax finetuning requires it.
  bool stage1_complete{false};
  std::string last_stage;
  /// Free-form provenance (config hash, seed) carried along unchanged.
  nlohmann::json extra = nlohmann::json::object();
};

/// One JSON header line followed by every tensor as little-endian f64, in declaration order.
void save_checkpoint(const ModelParams & params, const CheckpointInfo & info, const std::filesystem::path & path);

struct LoadedCheckpoint
{
  ModelParams params;
  CheckpointInfo info;
};

/// Throws IoError when unreadable and FormatError when the header or payload is malformed.
[[nodiscard]] LoadedCheckpoint load_checkpoint(const std::filesystem::path & path);

}  // namespace segpark
