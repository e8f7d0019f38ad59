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
#include <string_view>
#include <vector>

#include "json.hpp"

namespace segpark::cli
{

/// Lowercase hex SHA-256 of a byte string.
[[nodiscard]] std::string sha256_hex(std::string_view bytes);
/// SHA-256 of a file's contents; throws IoError when unreadable.
[[nodiscard]] std::string file_sha256(const std::filesystem::path & path);

/// Library, compiler and dependency versions recorded in every manifest.
[[nodiscard]] nlohmann::json version_info();

/// Run description written next to a command's outputs as `<output>.manifest.json`. Contains no
/// timestamps or host details so identical runs produce identical manifests.
struct Manifest
{
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed{0};
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
};

[[nodiscard]] nlohmann::json to_json(const Manifest & m);
/// Writes `<first output>.manifest.json` and returns its path.
std::filesystem::path write_manifest(const Manifest & m);

/// Writes a text file atomically enough for our purposes; throws IoError.
void write_text(const std::filesystem::path & path, std::string_view text);

}  // namespace segpark::cli
