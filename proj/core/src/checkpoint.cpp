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

#include "segpark/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

constexpr const char * kFormat = "segpark-checkpoint";
constexpr int kVersion = 1;

void put_f64(std::string & out, double v)
{
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFFU));
    bits >>= 8U;
  }
}

double get_f64(const unsigned char * p)
{
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) {
    bits = (bits << 8U) | p[i];
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ModelParams & params, const CheckpointInfo & info, const std::filesystem::path & path)
{
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["model"] = params.config();
  header["step"] = info.step;
  header["stage1_complete"] = info.stage1_complete;
  header["last_stage"] = info.last_stage;
  header["extra"] = info.extra;
  nlohmann::json tensors = nlohmann::json::array();
  std::string payload;
  for (const auto & t : params.tensors()) {
    tensors.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      put_f64(payload, t.value.data()[i]);
    }
  }
  header["tensors"] = std::move(tensors);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  const std::string line = header.dump() + "\n";
  f.write(line.data(), static_cast<std::streamsize>(line.size()));
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) {
    throw IoError("failed writing checkpoint: " + path.string());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path & path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw FormatError("checkpoint: missing header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", std::string{}) != kFormat || header.value("version", 0) != kVersion) {
    throw FormatError("checkpoint: unsupported format or version");
  }
  LoadedCheckpoint out;
  try {
    const ModelConfig cfg = header.at("model").get<ModelConfig>();
    if (!cfg.valid()) {
      throw FormatError("checkpoint: invalid model config");
    }
    out.params = ModelParams(cfg, 0);
    out.info.step = header.value("step", 0);
    out.info.stage1_complete = header.value("stage1_complete", false);
    out.info.last_stage = header.value("last_stage", std::string{});
    out.info.extra = header.value("extra", nlohmann::json::object());
    const auto & tensors = header.at("tensors");
    if (tensors.size() != out.params.tensors().size()) {
      throw FormatError("checkpoint: tensor count does not match the model config");
    }
    std::size_t offset = nl + 1;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      Tensor & t = out.params.tensors()[i];
      if (tensors[i].at("name").get<std::string>() != t.name ||
          tensors[i].at("rows").get<Eigen::Index>() != t.value.rows() ||
          tensors[i].at("cols").get<Eigen::Index>() != t.value.cols()) {
        throw FormatError("checkpoint: tensor " + std::to_string(i) + " does not match " + t.name);
      }
      const auto n = static_cast<std::size_t>(t.value.size());
      if (bytes.size() < offset + 8 * n) {
        throw FormatError("checkpoint: truncated payload in " + t.name);
      }
      const auto * p = reinterpret_cast<const unsigned char *>(bytes.data() + offset);
      for (std::size_t k = 0; k < n; ++k) {
        t.value.data()[k] = get_f64(p + 8 * k);
      }
      offset += 8 * n;
    }
    if (offset != bytes.size()) {
      throw FormatError("checkpoint: trailing bytes after the last tensor");
    }
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (!out.params.all_finite()) {
    throw FormatError("checkpoint: non-finite parameter values");
  }
  return out;
}

}  // namespace segpark
